#include "rcabs/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rcabs/errors.hpp"
#include "rcabs/numeric.hpp"

namespace rcabs {

class PerturbationStepper {
 public:
  PerturbationStepper(Index n, Index k)
      : k1_(n), k2_(n), k3_(n), k4_(n), xs_(n), K1_(n, k), K2_(n, k), K3_(n, k), K4_(n, k), ps_(n, k) {}

  // Leaves J(x) p at the start state in first_action().
  void step(JacobianOrbitProvider& provider, Mat& p, double dt) {
    Vec& x = provider.state_;
    provider.field_and_action(x, p, k1_, K1_);
    xs_ = x + 0.5 * dt * k1_;
    ps_ = p + 0.5 * dt * K1_;
    provider.field_and_action(xs_, ps_, k2_, K2_);
    xs_ = x + 0.5 * dt * k2_;
    ps_ = p + 0.5 * dt * K2_;
    provider.field_and_action(xs_, ps_, k3_, K3_);
    xs_ = x + dt * k3_;
    ps_ = p + dt * K3_;
    provider.field_and_action(xs_, ps_, k4_, K4_);
    x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    p += (dt / 6.0) * (K1_ + 2.0 * K2_ + 2.0 * K3_ + K4_);
    provider.time_ += dt;
    if (!bounded(x)) throw DivergenceError("orbit diverged at t=" + std::to_string(provider.time_), -1);
    if (!p.allFinite()) {
      throw DivergenceError("perturbation vectors became non-finite at t=" + std::to_string(provider.time_), -1);
    }
  }

  const Mat& first_action() const { return K1_; }

 private:
  Vec k1_, k2_, k3_, k4_, xs_;
  Mat K1_, K2_, K3_, K4_, ps_;
};

JacobianOrbitProvider::JacobianOrbitProvider(Vec initial_state, double t0)
    : state_(std::move(initial_state)), time_(t0) {}

void JacobianOrbitProvider::field_and_action(const Vec& x, const Mat& p, Vec& field, Mat& action) const {
  vector_field(x, field);
  jacobian_action(x, p, action);
}

void JacobianOrbitProvider::reset(Vec state, double t) {
  if (state.size() != dimension()) throw ContractViolation("provider state has wrong dimension");
  state_ = std::move(state);
  time_ = t;
}

void JacobianOrbitProvider::advance(double dt) {
  const Index n = state_.size();
  Vec k1(n), k2(n), k3(n), k4(n);
  vector_field(state_, k1);
  vector_field(state_ + 0.5 * dt * k1, k2);
  vector_field(state_ + 0.5 * dt * k2, k3);
  vector_field(state_ + dt * k3, k4);
  state_ += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  time_ += dt;
  if (!bounded(state_)) throw DivergenceError("orbit diverged at t=" + std::to_string(time_), -1);
}

AttractorOrbit::AttractorOrbit(AttractorSpec spec, Vec x0)
    : JacobianOrbitProvider(std::move(x0)), spec_(spec) {
  if (state().size() != spec_.dimension()) throw ContractViolation("AttractorOrbit: initial state has wrong dimension");
}

void AttractorOrbit::vector_field(const Vec& x, Vec& out) const { out = derivative(spec_, x); }

void AttractorOrbit::jacobian_action(const Vec& x, const Mat& p, Mat& out) const {
  out.noalias() = analytic_jacobian(spec_, x) * p;
}

ClosedLoopOrbit::ClosedLoopOrbit(const Reservoir& res, const OutputMatrix& W, Vec r0)
    : JacobianOrbitProvider(std::move(r0)), res_(res), W_(W) {
  if (W.neurons() != res.neurons() || W.outputs() != res.inputs()) {
    throw ContractViolation("ClosedLoopOrbit: output matrix shape does not match reservoir");
  }
  if (state().size() != res.neurons()) throw ContractViolation("ClosedLoopOrbit: initial state has wrong dimension");
}

void ClosedLoopOrbit::vector_field(const Vec& x, Vec& out) const { closed_loop_field(res_, W_, x, out); }

void ClosedLoopOrbit::jacobian_action(const Vec& x, const Mat& p, Mat& out) const {
  ClosedLoopJacobian(res_, W_, x).apply(p, out);
}

void ClosedLoopOrbit::field_and_action(const Vec& x, const Mat& p, Vec& field, Mat& action) const {
  Vec u = res_.A * x;
  u.noalias() += res_.B * (W_.W * x);
  u += res_.d;
  tanh_inplace(u);
  field = res_.gamma * (u - x);
  const Vec gain = 1.0 - u.array().square();
  const Mat wp = W_.W * p;
  action.noalias() = res_.A * p;
  action.noalias() += res_.B * wp;
  action = res_.gamma * (gain.asDiagonal() * action - p);
}

LinearFlow::LinearFlow(Mat jacobian, Vec x0) : JacobianOrbitProvider(std::move(x0)), jacobian_(std::move(jacobian)) {
  if (jacobian_.rows() != jacobian_.cols() || jacobian_.rows() != state().size()) {
    throw ContractViolation("LinearFlow: Jacobian must be square and match the state");
  }
}

void LinearFlow::vector_field(const Vec& x, Vec& out) const { out.noalias() = jacobian_ * x; }

void LinearFlow::jacobian_action(const Vec&, const Mat& p, Mat& out) const { out.noalias() = jacobian_ * p; }

void LyapunovConfig::validate(Index system_dimension) const {
  if (k_exponents < 1 || k_exponents > system_dimension) {
    throw ContractViolation("lyapunov.k_exponents must lie in [1, " + std::to_string(system_dimension) + "]");
  }
  if (!(dt > 0.0) || !(transient_s > 0.0) || !(measure_s > 0.0)) {
    throw ContractViolation("lyapunov durations and dt must be positive");
  }
  if (reorthonormalize_every < 1) throw ContractViolation("lyapunov.reorthonormalize_every must be >= 1");
}

void gram_schmidt_inplace(Mat& v, Vec& norms) {
  const Index m = v.cols();
  if (m > v.rows()) throw ContractViolation("gram_schmidt: more vectors than dimensions");
  norms.resize(m);
  for (Index i = 0; i < m; ++i) {
    const double original = v.col(i).norm();
    for (int pass = 0; pass < 2; ++pass) {
      if (i == 0) break;
      const Vec coeffs = v.leftCols(i).transpose() * v.col(i);
      v.col(i).noalias() -= v.leftCols(i) * coeffs;
    }
    const double norm = v.col(i).norm();
    if (!(norm > 1e-12 * original)) throw DegenerateBasisError(static_cast<long>(i + 1));
    v.col(i) /= norm;
    norms[i] = norm;
  }
}

Mat gram_schmidt(const Mat& v) {
  Mat out = v;
  Vec norms;
  gram_schmidt_inplace(out, norms);
  return out;
}

void step_perturbations(JacobianOrbitProvider& provider, Mat& p, double dt) {
  if (p.rows() != provider.dimension()) throw ContractViolation("step_perturbations: vector dimension mismatch");
  PerturbationStepper stepper(p.rows(), p.cols());
  stepper.step(provider, p, dt);
}

Vec instantaneous_exponents(const JacobianOrbitProvider& provider, const Mat& p) {
  if (p.rows() != provider.dimension()) throw ContractViolation("instantaneous_exponents: dimension mismatch");
  const Mat gram = p.transpose() * p;
  if ((gram - Mat::Identity(p.cols(), p.cols())).cwiseAbs().maxCoeff() > 1e-8) {
    throw ContractViolation("instantaneous_exponents: vectors are not orthonormal");
  }
  Mat jp(p.rows(), p.cols());
  provider.jacobian_action(provider.state(), p, jp);
  return (jp.array() * p.array()).colwise().sum().transpose();
}

LyapunovResult lyapunov_spectrum(JacobianOrbitProvider& provider, const LyapunovConfig& cfg) {
  const Index n = provider.dimension();
  cfg.validate(n);
  const Index k = cfg.k_exponents;
  const Index every = cfg.reorthonormalize_every;
  const Index burn = static_cast<Index>(std::llround(cfg.transient_s / cfg.dt));
  const Index measure = static_cast<Index>(std::llround(cfg.measure_s / cfg.dt));

  Mat p = Mat::Identity(n, k);
  Mat basis(n, k);
  PerturbationStepper stepper(n, k);
  Vec norms(k);

  std::vector<Vec> running;
  std::vector<double> times;
  running.reserve(static_cast<std::size_t>(measure / every + 1));
  times.reserve(running.capacity());
  Vec sum = Vec::Zero(k);
  Vec log_stretch = Vec::Zero(k);
  Index stretch_steps = 0;
  LyapunovResult result;

  for (Index s = 0; s < burn + measure; ++s) {
    const bool sample = s >= burn && s % every == 0;
    if (s == burn) result.measure_start = provider.time();
    const double t = provider.time();
    if (sample) basis = p;

    try {
      stepper.step(provider, p, cfg.dt);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string("lyapunov_spectrum: ") + e.what(), static_cast<long>(s + 1));
    }

    if (sample) {
      // The first RK4 stage already holds J(x(t)) applied to the orthonormal basis.
      sum += (stepper.first_action().array() * basis.array()).colwise().sum().transpose().matrix();
      running.push_back(sum / static_cast<double>(running.size() + 1));
      times.push_back(t);
    }
    if ((s + 1) % every == 0) {
      try {
        gram_schmidt_inplace(p, norms);
      } catch (const DegenerateBasisError& e) {
        throw NumericalError(std::string(e.what()) + " at t=" + std::to_string(provider.time()));
      }
      if (s + 1 - every >= burn) {
        log_stretch += norms.array().log().matrix();
        stretch_steps += every;
      }
    }
  }
  result.measure_end = provider.time();

  if (running.empty()) throw ContractViolation("lyapunov_spectrum: measurement window holds no samples");
  const Vec mean = running.back();
  Vec stretch = stretch_steps > 0 ? Vec(log_stretch / (static_cast<double>(stretch_steps) * cfg.dt))
                                  : Vec(Vec::Constant(k, std::nan("")));

  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return mean[a] > mean[b]; });

  result.exponents.resize(k);
  result.stretch_exponents.resize(k);
  result.running_means.resize(k, static_cast<Index>(running.size()));
  result.sample_times.resize(static_cast<Index>(times.size()));
  for (Index i = 0; i < k; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    result.exponents[i] = mean[src];
    result.stretch_exponents[i] = stretch[src];
    for (std::size_t j = 0; j < running.size(); ++j) result.running_means(i, static_cast<Index>(j)) = running[j][src];
  }
  for (std::size_t j = 0; j < times.size(); ++j) result.sample_times[static_cast<Index>(j)] = times[j];
  return result;
}

}  // namespace rcabs
