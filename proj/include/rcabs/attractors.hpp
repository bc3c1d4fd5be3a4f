#pragma once

#include <string>
#include <string_view>

#include "rcabs/trajectory.hpp"
#include "rcabs/types.hpp"

namespace rcabs {

enum class AttractorKind { limit_cycle, lorenz };

std::string to_string(AttractorKind kind);
/// Accepts "limit_cycle", "limit-cycle" and "lorenz".
AttractorKind parse_attractor_kind(std::string_view name);

struct AttractorSpec {
  AttractorKind kind = AttractorKind::limit_cycle;

  Index dimension() const { return kind == AttractorKind::limit_cycle ? 2 : 3; }
  /// (1, 1) for the limit cycle, (1, 1, 1) for Lorenz.
  Vec default_initial_state() const;
};

/// Translation x -> x + magnitude * direction.
struct ShiftSpec {
  Vec direction;
  double magnitude = 0.0;
};

// Limit cycle (Hopf normal form, radius sqrt(2), angular speed 10):
//   x1' = 10 x1 (2 - x1^2 - x2^2) - 10 x2
//   x2' = 10 x2 (2 - x1^2 - x2^2) + 10 x1
// Lorenz: sigma = 10, rho = 28, beta = 8/3.
Vec derivative(const AttractorSpec& spec, const Vec& state);
Mat analytic_jacobian(const AttractorSpec& spec, const Vec& state);

/// Fixed-step RK4; returns n_steps + 1 states starting at x0 (t0 = 0).
/// Throws DivergenceError when a component becomes non-finite or exceeds
/// kDivergenceBound in magnitude.
Trajectory integrate(const AttractorSpec& spec, const Vec& x0, double dt, Index n_steps);

Trajectory shift(const Trajectory& traj, const ShiftSpec& shift);

}  // namespace rcabs
