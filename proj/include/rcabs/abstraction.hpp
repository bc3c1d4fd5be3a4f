#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rcabs/attractors.hpp"
#include "rcabs/reservoir.hpp"
#include "rcabs/training.hpp"
#include "rcabs/types.hpp"

namespace rcabs {

/// Reservoir dynamics linearized about a base trajectory (r0(t), x0(t)):
///   A*(t) = gamma (diag(dg) A - I),  B*(t) = gamma diag(dg) B,
///   dg = 1 - tanh^2(A r0 + B x0 + d).
/// Only the base trajectory is stored; gains are evaluated on demand. At a
/// step's midpoint the base state and input use the same cubic midpoint as
/// drive(); a feedback base takes the input as W r.
/// Holds a reference to the reservoir.
class LinearizedSystem {
 public:
  LinearizedSystem(const Reservoir& res, Trajectory base_states, Trajectory base_inputs);
  /// Autonomous base: x0(t) = W r0(t).
  LinearizedSystem(const Reservoir& res, Trajectory base_states, const OutputMatrix& W);

  const Reservoir& reservoir() const { return res_; }
  const Trajectory& base_states() const { return states_; }
  bool is_feedback() const { return feedback_.has_value(); }
  Index length() const { return states_.length(); }
  double dt() const { return states_.dt(); }

  /// dg at fraction theta in [0, 1] of step i (theta = 0 is sample i).
  Vec stage_gain(Index i, double theta) const;
  Vec gain(Index i) const { return stage_gain(i, 0.0); }

  /// Dense A*(t_i) and B*(t_i); for small N.
  Mat state_matrix(Index i) const;
  Mat input_matrix(Index i) const;

 private:
  const Reservoir& res_;
  Trajectory states_;
  std::optional<Trajectory> inputs_;
  std::optional<Mat> feedback_;
};

LinearizedSystem linearize_along(const Reservoir& res, const Trajectory& r0, const Trajectory& x0);

enum class PerturbationSource { input_shift, feedback };

struct PerturbationTrajectory {
  Mat dr;  // N x length
  double dt = 0.0;
  double t0 = 0.0;
  PerturbationSource source = PerturbationSource::input_shift;

  Index length() const { return dr.cols(); }
  PerturbationTrajectory tail(Index begin) const;
};

/// RK4 solution of dr' = A*(t) dr + B*(t) a dc.
PerturbationTrajectory evolve_input_perturbation(const LinearizedSystem& lin, const Vec& a, double dc,
                                                 const Vec& dr0);

/// RK4 solution of dr' = (A*(t) + B*(t) W) dr along an autonomous base.
PerturbationTrajectory evolve_feedback_perturbation(const LinearizedSystem& lin, const OutputMatrix& W,
                                                    const Vec& dr0);

/// Time mean of |W dr(t) - a dc| / |a dc|.
double differential_map_residual(const OutputMatrix& W, const PerturbationTrajectory& dr, const Vec& a,
                                 double dc);

/// Trapezoidal time mean of dr(t).
Vec delta_r(const PerturbationTrajectory& dr);

/// Mean log-growth rate of |dr(t)| between settle_s and the end.
double log_growth_rate(const PerturbationTrajectory& dr, double settle_s);

struct Fig2cProjection {
  Vec axis;              // delta_r / |delta_r|
  Mat principal_axes;    // N x 2, orthonormal and orthogonal to axis
  Vec center;            // mean of the pooled states
  std::vector<Mat> coordinates;  // per trajectory, 3 x length: (u, pc1, pc2)
};

/// u = <r, axis>; pc1, pc2 = projections of the centred state onto the top
/// two principal directions of the pooled states with the axis component
/// removed. PCA uses at most max_columns evenly strided pooled samples.
Fig2cProjection project_fig2c(const std::vector<Trajectory>& trajectories, const Vec& delta_r,
                              Index max_columns = 50000);

struct InterpolationOptions {
  double prepare_s = 50.0;
  double autonomous_s = 500.0;
  double settle_s = 10.0;      // excluded from the output statistics
  Index record_every = 10;
  std::uint64_t seed = 1;
};

struct DriftRow {
  double c = 0.0;
  double c_hat = 0.0;
  double residual = 0.0;  // mean distance of the output to the c-shifted attractor
  bool bounded = false;
  std::string error;
};

std::vector<double> default_test_shifts();

/// Prepares the open-loop reservoir on each shifted memory, closes the loop
/// and estimates the retained shift c_hat = <mean output - mean attractor, a>/|a|^2.
/// Divergence is recorded per row.
std::vector<DriftRow> interpolation_test(const Reservoir& res, const OutputMatrix& W, const AttractorSpec& spec,
                                         const TrainingConfig& cfg, const std::vector<double>& test_shifts,
                                         const InterpolationOptions& opts = {});

struct MechanismOptions {
  double prepare_s = 50.0;
  double burn_in_s = 10.0;
  double window_s = 1.0;
  double fd_dc = 1e-4;
  double feedback_s = 10.0;
  double feedback_settle_s = 1.0;
  std::uint64_t seed = 1;
};

struct MechanismReport {
  double fd_relative_error = 0.0;       // linearized vs nonlinear finite difference
  double differential_residual = 0.0;   // |W dr - a| / |a| per unit shift
  double feedback_growth_rate = 0.0;    // shift perturbation under feedback
  double random_growth_rate = 0.0;      // random perturbation under feedback
  Vec delta_r;                          // per unit shift
};

/// Runs the linearized-response checks about the c = 0 memory.
MechanismReport analyze_mechanism(const Reservoir& res, const OutputMatrix& W, const AttractorSpec& spec,
                                  const TrainingConfig& cfg, const MechanismOptions& opts = {});

/// Relative deviation of linearized vs nonlinear response over the window for
/// a given dc; exposed for the validity-envelope check.
double linearization_error(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg,
                           double dc, const MechanismOptions& opts = {});

}  // namespace rcabs
