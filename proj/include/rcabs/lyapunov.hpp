#pragma once

#include "rcabs/attractors.hpp"
#include "rcabs/reservoir.hpp"
#include "rcabs/types.hpp"

namespace rcabs {

/// A flow x' = f(x) together with its Jacobian action J(x) p, positioned at a
/// current base state. The orbit is advanced with RK4.
class JacobianOrbitProvider {
 public:
  JacobianOrbitProvider(Vec initial_state, double t0 = 0.0);
  virtual ~JacobianOrbitProvider() = default;

  virtual Index dimension() const = 0;
  virtual void vector_field(const Vec& x, Vec& out) const = 0;
  /// out = J(x) p, column by column. Must be linear in p.
  virtual void jacobian_action(const Vec& x, const Mat& p, Mat& out) const = 0;
  /// Both at once; override when they share work.
  virtual void field_and_action(const Vec& x, const Mat& p, Vec& field, Mat& action) const;

  const Vec& state() const { return state_; }
  double time() const { return time_; }
  void reset(Vec state, double t);

  /// Base orbit only.
  void advance(double dt);

 private:
  friend class PerturbationStepper;
  Vec state_;
  double time_;
};

/// Raw attractor with its analytic Jacobian.
class AttractorOrbit : public JacobianOrbitProvider {
 public:
  AttractorOrbit(AttractorSpec spec, Vec x0);
  Index dimension() const override { return spec_.dimension(); }
  void vector_field(const Vec& x, Vec& out) const override;
  void jacobian_action(const Vec& x, const Mat& p, Mat& out) const override;

 private:
  AttractorSpec spec_;
};

/// Autonomous reservoir r' = gamma(-r + tanh((A + B W) r + d)).
/// Holds references to res and W.
class ClosedLoopOrbit : public JacobianOrbitProvider {
 public:
  ClosedLoopOrbit(const Reservoir& res, const OutputMatrix& W, Vec r0);
  Index dimension() const override { return res_.neurons(); }
  void vector_field(const Vec& x, Vec& out) const override;
  void jacobian_action(const Vec& x, const Mat& p, Mat& out) const override;
  void field_and_action(const Vec& x, const Mat& p, Vec& field, Mat& action) const override;

 private:
  const Reservoir& res_;
  const OutputMatrix& W_;
};

/// x' = J x with a constant matrix J.
class LinearFlow : public JacobianOrbitProvider {
 public:
  LinearFlow(Mat jacobian, Vec x0);
  Index dimension() const override { return jacobian_.rows(); }
  void vector_field(const Vec& x, Vec& out) const override;
  void jacobian_action(const Vec& x, const Mat& p, Mat& out) const override;

 private:
  Mat jacobian_;
};

struct LyapunovConfig {
  Index k_exponents = 3;
  double dt = 0.001;
  double transient_s = 50.0;
  double measure_s = 100.0;
  Index reorthonormalize_every = 1;

  void validate(Index system_dimension) const;
};

struct LyapunovResult {
  Vec exponents;             // descending
  Vec stretch_exponents;     // log-stretch estimate, same ordering
  Mat running_means;         // k x samples
  Vec sample_times;
  double measure_start = 0.0;
  double measure_end = 0.0;
};

/// Classical Gram-Schmidt with one reorthogonalization pass over the columns
/// of v. Throws DegenerateBasisError (1-based index) when a residual norm
/// falls below 1e-12 relative to the input vector.
Mat gram_schmidt(const Mat& v);
/// In place; norms receives the residual norm of each column before scaling.
void gram_schmidt_inplace(Mat& v, Vec& norms);

/// One joint RK4 step of the base orbit and the tangent vectors (columns of p),
/// with the Jacobian action evaluated at the RK4 stage states.
void step_perturbations(JacobianOrbitProvider& provider, Mat& p, double dt);

/// Rayleigh quotients (J p_i) . p_i at the provider's current state; p must be
/// orthonormal.
Vec instantaneous_exponents(const JacobianOrbitProvider& provider, const Mat& p);

/// Burn-in of cfg.transient_s for orbit and tangent directions, then the time
/// average of the instantaneous exponents over cfg.measure_s.
LyapunovResult lyapunov_spectrum(JacobianOrbitProvider& provider, const LyapunovConfig& cfg);

}  // namespace rcabs
