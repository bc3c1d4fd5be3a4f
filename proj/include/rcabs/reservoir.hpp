#pragma once

#include <cstdint>
#include <functional>

#include "rcabs/trajectory.hpp"
#include "rcabs/types.hpp"

namespace rcabs {

struct ReservoirParams {
  Index n_neurons = 1000;
  double sparsity = 0.02;
  double spectral_radius = 0.6;
  double input_scale = 0.1;
  double bias_scale = 10.0;
  double gamma = 25.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Continuous-time reservoir  (1/gamma) r' = -r + tanh(A r + B x + d).
struct Reservoir {
  SparseMat A;
  Mat B;
  Vec d;
  double gamma = 0.0;
  ReservoirParams params;
  // Substream actually used to draw A; nonzero only if earlier draws were all-zero.
  std::uint32_t substream = 0;

  Index neurons() const { return A.rows(); }
  Index inputs() const { return B.cols(); }
};

/// Trained linear readout, k x N.
struct OutputMatrix {
  Mat W;

  Index outputs() const { return W.rows(); }
  Index neurons() const { return W.cols(); }
};

/// Draw order from the seeded generator: the N*N nonzero mask (row-major),
/// the values of the nonzeros (row-major), B (row-major), then d. A is then
/// rescaled so that its spectral radius equals params.spectral_radius. If the
/// mask comes out empty the whole draw is repeated on the next substream.
Reservoir build_reservoir(const ReservoirParams& params, Index k_inputs);

/// |lambda_max| by power iteration with a two-term recurrence fit, so that a
/// dominant complex-conjugate pair (or a +-lambda pair) is resolved. Throws
/// ConvergenceError carrying the last estimate after max_iterations.
double spectral_radius(const Mat& m, double rel_tol = 1e-9, int max_iterations = 10000);

/// |lambda_max| from the full eigenvalue decomposition.
double spectral_radius_dense(const Mat& m);

void open_loop_field(const Reservoir& res, const Vec& r, const Vec& x, Vec& out);
void closed_loop_field(const Reservoir& res, const OutputMatrix& W, const Vec& r, Vec& out);

/// RK4 stepper with preallocated workspace. Not thread-safe; one per thread.
class ReservoirStepper {
 public:
  explicit ReservoirStepper(const Reservoir& res);

  /// Input at the step start, midpoint and end; the two midpoint stages share xm.
  void step_open(Vec& r, const Vec& x0, const Vec& xm, const Vec& x1, double dt);
  void step_closed(Vec& r, const OutputMatrix& W, double dt);

 private:
  void field_open(const Vec& r, const Vec& bx, Vec& out);
  void field_closed(const Vec& r, const Mat& W, Vec& out);

  const Reservoir& res_;
  Vec k1_, k2_, k3_, k4_, tmp_, u_, bx0_, bxm_, bx1_, wr_;
};

using StateObserver = std::function<void(Index step, const Vec& r)>;

/// Drives the reservoir with a sampled input. Inside a step the RK4 stages see
/// the input at the step start, its cubic midpoint and the step end.
/// observe(i, r) is called with the state aligned to input sample i, for
/// i = 0 .. input.length()-1. r holds the final state on return.
void drive_streaming(const Reservoir& res, const Trajectory& input, Vec& r,
                     const StateObserver& observe);

Trajectory drive(const Reservoir& res, const Trajectory& input, const Vec& r0,
                 Index record_every = 1);

/// Closed loop: observe(i, r) for i = 0 .. n_steps.
void evolve_autonomous_streaming(const Reservoir& res, const OutputMatrix& W, Vec& r, double dt,
                                 Index n_steps, const StateObserver& observe);

struct AutonomousRun {
  Trajectory states;
  Trajectory outputs;
};

AutonomousRun evolve_autonomous(const Reservoir& res, const OutputMatrix& W, const Vec& r0,
                                double dt, Index n_steps, Index record_every = 1);

/// J(r) = gamma (diag(1 - tanh^2(u)) (A + B W) - I),  u = (A + B W) r + d.
/// Holds references to res and W; must not outlive them.
class ClosedLoopJacobian {
 public:
  ClosedLoopJacobian(const Reservoir& res, const OutputMatrix& W, const Vec& r);

  void apply(const Mat& p, Mat& out) const;
  Mat apply(const Mat& p) const;
  /// Materialized N x N matrix; only for N <= 2000.
  Mat dense() const;
  const Vec& gain() const { return gain_; }

 private:
  const Reservoir& res_;
  const OutputMatrix& W_;
  Vec gain_;
};

ClosedLoopJacobian closed_loop_jacobian(const Reservoir& res, const OutputMatrix& W, const Vec& r);

}  // namespace rcabs
