#include "rcabs/attractors.hpp"

#include <cmath>

#include "rcabs/errors.hpp"

namespace rcabs {
namespace {

void check_dimension(const AttractorSpec& spec, Index dim, const char* what) {
  if (dim != spec.dimension()) {
    throw ContractViolation(std::string(what) + ": expected dimension " +
                            std::to_string(spec.dimension()) + " for " + to_string(spec.kind) +
                            ", got " + std::to_string(dim));
  }
}

void field(AttractorKind kind, const double* x, double* dx) {
  if (kind == AttractorKind::limit_cycle) {
    const double radial = 2.0 - x[0] * x[0] - x[1] * x[1];
    dx[0] = 10.0 * x[0] * radial - 10.0 * x[1];
    dx[1] = 10.0 * x[1] * radial + 10.0 * x[0];
  } else {
    dx[0] = -10.0 * (x[0] - x[1]);
    dx[1] = 28.0 * x[0] - x[1] - x[0] * x[2];
    dx[2] = -8.0 / 3.0 * x[2] + x[0] * x[1];
  }
}

}  // namespace

std::string to_string(AttractorKind kind) {
  return kind == AttractorKind::limit_cycle ? "limit_cycle" : "lorenz";
}

AttractorKind parse_attractor_kind(std::string_view name) {
  if (name == "limit_cycle" || name == "limit-cycle") return AttractorKind::limit_cycle;
  if (name == "lorenz") return AttractorKind::lorenz;
  throw ContractViolation("unknown attractor kind '" + std::string(name) + "'");
}

Vec AttractorSpec::default_initial_state() const { return Vec::Ones(dimension()); }

Vec derivative(const AttractorSpec& spec, const Vec& state) {
  check_dimension(spec, state.size(), "derivative");
  Vec out(state.size());
  field(spec.kind, state.data(), out.data());
  return out;
}

Mat analytic_jacobian(const AttractorSpec& spec, const Vec& state) {
  check_dimension(spec, state.size(), "analytic_jacobian");
  const double x1 = state[0];
  const double x2 = state[1];
  if (spec.kind == AttractorKind::limit_cycle) {
    const double radial = 2.0 - x1 * x1 - x2 * x2;
    Mat j(2, 2);
    j << 10.0 * radial - 20.0 * x1 * x1, -20.0 * x1 * x2 - 10.0,
        -20.0 * x1 * x2 + 10.0, 10.0 * radial - 20.0 * x2 * x2;
    return j;
  }
  const double x3 = state[2];
  Mat j(3, 3);
  j << -10.0, 10.0, 0.0,
      28.0 - x3, -1.0, -x1,
      x2, x1, -8.0 / 3.0;
  return j;
}

Trajectory integrate(const AttractorSpec& spec, const Vec& x0, double dt, Index n_steps) {
  check_dimension(spec, x0.size(), "integrate");
  if (!(dt > 0.0)) throw ContractViolation("integrate: dt must be positive");
  if (n_steps < 1) throw ContractViolation("integrate: n_steps must be >= 1");

  const Index k = spec.dimension();
  Mat states(k, n_steps + 1);
  states.col(0) = x0;
  double x[3], k1[3], k2[3], k3[3], k4[3], tmp[3];
  for (Index j = 0; j < k; ++j) x[j] = x0[j];

  for (Index step = 1; step <= n_steps; ++step) {
    field(spec.kind, x, k1);
    for (Index j = 0; j < k; ++j) tmp[j] = x[j] + 0.5 * dt * k1[j];
    field(spec.kind, tmp, k2);
    for (Index j = 0; j < k; ++j) tmp[j] = x[j] + 0.5 * dt * k2[j];
    field(spec.kind, tmp, k3);
    for (Index j = 0; j < k; ++j) tmp[j] = x[j] + dt * k3[j];
    field(spec.kind, tmp, k4);
    for (Index j = 0; j < k; ++j) {
      x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
      if (!std::isfinite(x[j]) || std::abs(x[j]) > kDivergenceBound) {
        throw DivergenceError(to_string(spec.kind) + " integration diverged", static_cast<long>(step));
      }
      states(j, step) = x[j];
    }
  }
  return Trajectory(std::move(states), dt, 0.0);
}

Trajectory shift(const Trajectory& traj, const ShiftSpec& s) {
  if (s.direction.size() != traj.dimension()) {
    throw ContractViolation("shift: direction has dimension " + std::to_string(s.direction.size()) +
                            ", trajectory has " + std::to_string(traj.dimension()));
  }
  Mat states = traj.states();
  states.colwise() += s.magnitude * s.direction;
  return Trajectory(std::move(states), traj.dt(), traj.t0());
}

}  // namespace rcabs
