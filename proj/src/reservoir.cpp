#include "rcabs/reservoir.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <vector>

#include "rcabs/errors.hpp"
#include "rcabs/numeric.hpp"
#include "rcabs/rng.hpp"

namespace rcabs {
namespace {

constexpr std::uint32_t kMaxSubstreams = 16;
constexpr Index kDenseEigenLimit = 4000;

void check_readout(const Reservoir& res, const OutputMatrix& W) {
  if (W.neurons() != res.neurons() || W.outputs() != res.inputs()) {
    throw ContractViolation("output matrix is " + std::to_string(W.outputs()) + "x" +
                            std::to_string(W.neurons()) + ", reservoir expects " +
                            std::to_string(res.inputs()) + "x" + std::to_string(res.neurons()));
  }
}

}  // namespace

void ReservoirParams::validate() const {
  if (n_neurons < 1) throw ContractViolation("n_neurons must be positive");
  if (!(sparsity > 0.0 && sparsity <= 1.0)) throw ContractViolation("sparsity must lie in (0, 1]");
  if (!(spectral_radius > 0.0)) throw ContractViolation("spectral_radius must be positive");
  if (!(input_scale > 0.0)) throw ContractViolation("input_scale must be positive");
  if (!(bias_scale > 0.0)) throw ContractViolation("bias_scale must be positive");
  if (!(gamma > 0.0)) throw ContractViolation("gamma must be positive");
}

Reservoir build_reservoir(const ReservoirParams& params, Index k_inputs) {
  params.validate();
  if (k_inputs < 1) throw ContractViolation("build_reservoir: k_inputs must be >= 1");
  const Index n = params.n_neurons;

  for (std::uint32_t sub = 0; sub < kMaxSubstreams; ++sub) {
    std::mt19937_64 gen(substream_seed(params.seed, Stream::reservoir_build, sub));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(params.sparsity * static_cast<double>(n * n) * 1.1) + 16);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (unit(gen) < params.sparsity) entries.emplace_back(i, j, 0.0);
      }
    }
    for (auto& e : entries) e = Eigen::Triplet<double>(e.row(), e.col(), sym(gen));

    Mat B(n, k_inputs);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < k_inputs; ++j) B(i, j) = sym(gen) * params.input_scale;
    }
    Vec d(n);
    for (Index i = 0; i < n; ++i) d[i] = sym(gen) * params.bias_scale;

    SparseMat A(n, n);
    A.setFromTriplets(entries.begin(), entries.end());
    A.makeCompressed();

    const Mat dense = Mat(A);
    const double radius = n <= kDenseEigenLimit ? spectral_radius_dense(dense) : spectral_radius(dense);
    if (!(radius > 0.0)) continue;

    A *= params.spectral_radius / radius;
    Reservoir res;
    res.A = std::move(A);
    res.B = std::move(B);
    res.d = std::move(d);
    res.gamma = params.gamma;
    res.params = params;
    res.substream = sub;
    return res;
  }
  throw NumericalError("build_reservoir: recurrent matrix has zero spectral radius on every substream");
}

double spectral_radius_dense(const Mat& m) {
  if (m.rows() != m.cols()) throw ContractViolation("spectral_radius: matrix must be square");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_radius(const Mat& m, double rel_tol, int max_iterations) {
  if (m.rows() != m.cols()) throw ContractViolation("spectral_radius: matrix must be square");
  if (!m.allFinite()) throw ContractViolation("spectral_radius: matrix has non-finite entries");
  const Index n = m.rows();
  if (n == 0) return 0.0;

  std::mt19937_64 gen(0x5eed);
  std::normal_distribution<double> normal;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(gen);
  v.normalize();

  Mat basis(n, 2);
  double estimate = 0.0;
  double previous = -1.0;
  for (int it = 0; it < max_iterations; ++it) {
    Vec w1 = m * v;
    const double n1 = w1.norm();
    if (n1 == 0.0) return 0.0;
    Vec w2 = m * w1;

    // Fit w2 + alpha w1 + beta v = 0; the roots of z^2 + alpha z + beta
    // approximate the two dominant eigenvalues.
    basis.col(0) = w1;
    basis.col(1) = v;
    const Eigen::Vector2d coef = basis.colPivHouseholderQr().solve(-w2);
    const double alpha = coef[0];
    const double beta = coef[1];
    const double disc = alpha * alpha - 4.0 * beta;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      estimate = std::max(std::abs((-alpha + s) / 2.0), std::abs((-alpha - s) / 2.0));
    } else {
      estimate = std::sqrt(beta);
    }

    if (it > 0 && std::abs(estimate - previous) <= rel_tol * std::max(estimate, 1e-300)) {
      return estimate;
    }
    previous = estimate;
    const double n2 = w2.norm();
    v = n2 > 0.0 ? Vec(w2 / n2) : Vec(w1 / n1);
  }
  throw ConvergenceError("spectral_radius: power iteration did not converge", estimate);
}

void open_loop_field(const Reservoir& res, const Vec& r, const Vec& x, Vec& out) {
  if (x.size() != res.inputs()) throw ContractViolation("open_loop_field: input dimension mismatch");
  if (r.size() != res.neurons()) throw ContractViolation("open_loop_field: state dimension mismatch");
  Vec u = res.A * r + res.B * x + res.d;
  tanh_inplace(u);
  out = res.gamma * (u - r);
}

void closed_loop_field(const Reservoir& res, const OutputMatrix& W, const Vec& r, Vec& out) {
  check_readout(res, W);
  if (r.size() != res.neurons()) throw ContractViolation("closed_loop_field: state dimension mismatch");
  Vec u = res.A * r + res.B * (W.W * r) + res.d;
  tanh_inplace(u);
  out = res.gamma * (u - r);
}

ReservoirStepper::ReservoirStepper(const Reservoir& res)
    : res_(res),
      k1_(res.neurons()),
      k2_(res.neurons()),
      k3_(res.neurons()),
      k4_(res.neurons()),
      tmp_(res.neurons()),
      u_(res.neurons()),
      bx0_(res.neurons()),
      bxm_(res.neurons()),
      bx1_(res.neurons()),
      wr_(res.inputs()) {}

void ReservoirStepper::field_open(const Vec& r, const Vec& bx, Vec& out) {
  u_.noalias() = res_.A * r;
  u_ += bx;
  tanh_inplace(u_);
  out = res_.gamma * (u_ - r);
}

void ReservoirStepper::field_closed(const Vec& r, const Mat& W, Vec& out) {
  wr_.noalias() = W * r;
  u_.noalias() = res_.A * r;
  u_.noalias() += res_.B * wr_;
  u_ += res_.d;
  tanh_inplace(u_);
  out = res_.gamma * (u_ - r);
}

void ReservoirStepper::step_open(Vec& r, const Vec& x0, const Vec& xm, const Vec& x1, double dt) {
  bx0_.noalias() = res_.B * x0;
  bx0_ += res_.d;
  bxm_.noalias() = res_.B * xm;
  bxm_ += res_.d;
  bx1_.noalias() = res_.B * x1;
  bx1_ += res_.d;
  field_open(r, bx0_, k1_);
  tmp_ = r + 0.5 * dt * k1_;
  field_open(tmp_, bxm_, k2_);
  tmp_ = r + 0.5 * dt * k2_;
  field_open(tmp_, bxm_, k3_);
  tmp_ = r + dt * k3_;
  field_open(tmp_, bx1_, k4_);
  r += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
}

void ReservoirStepper::step_closed(Vec& r, const OutputMatrix& W, double dt) {
  field_closed(r, W.W, k1_);
  tmp_ = r + 0.5 * dt * k1_;
  field_closed(tmp_, W.W, k2_);
  tmp_ = r + 0.5 * dt * k2_;
  field_closed(tmp_, W.W, k3_);
  tmp_ = r + dt * k3_;
  field_closed(tmp_, W.W, k4_);
  r += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
}

void drive_streaming(const Reservoir& res, const Trajectory& input, Vec& r,
                     const StateObserver& observe) {
  if (input.dimension() != res.inputs()) {
    throw ContractViolation("drive: input dimension " + std::to_string(input.dimension()) +
                            " does not match reservoir input count " +
                            std::to_string(res.inputs()));
  }
  if (r.size() != res.neurons()) throw ContractViolation("drive: initial state has wrong dimension");
  ReservoirStepper stepper(res);
  Vec x0(input.dimension()), xm(input.dimension()), x1(input.dimension());
  if (observe) observe(0, r);
  for (Index i = 1; i < input.length(); ++i) {
    x0 = input.state(i - 1);
    xm = input.midpoint(i - 1);
    x1 = input.state(i);
    stepper.step_open(r, x0, xm, x1, input.dt());
    if (!bounded(r)) throw DivergenceError("open-loop reservoir diverged", static_cast<long>(i));
    if (observe) observe(i, r);
  }
}

Trajectory drive(const Reservoir& res, const Trajectory& input, const Vec& r0, Index record_every) {
  if (record_every < 1) throw ContractViolation("drive: record_every must be >= 1");
  const Index count = (input.length() - 1) / record_every + 1;
  Mat states(res.neurons(), count);
  Vec r = r0;
  drive_streaming(res, input, r, [&](Index i, const Vec& state) {
    if (i % record_every == 0) states.col(i / record_every) = state;
  });
  return Trajectory(std::move(states), input.dt() * static_cast<double>(record_every), input.t0());
}

void evolve_autonomous_streaming(const Reservoir& res, const OutputMatrix& W, Vec& r, double dt,
                                 Index n_steps, const StateObserver& observe) {
  check_readout(res, W);
  if (!(dt > 0.0)) throw ContractViolation("evolve_autonomous: dt must be positive");
  if (n_steps < 0) throw ContractViolation("evolve_autonomous: n_steps must be >= 0");
  if (r.size() != res.neurons()) throw ContractViolation("evolve_autonomous: state has wrong dimension");
  ReservoirStepper stepper(res);
  if (observe) observe(0, r);
  for (Index i = 1; i <= n_steps; ++i) {
    stepper.step_closed(r, W, dt);
    if (!bounded(r)) throw DivergenceError("closed-loop reservoir diverged", static_cast<long>(i));
    if (observe) observe(i, r);
  }
}

AutonomousRun evolve_autonomous(const Reservoir& res, const OutputMatrix& W, const Vec& r0,
                                double dt, Index n_steps, Index record_every) {
  if (record_every < 1) throw ContractViolation("evolve_autonomous: record_every must be >= 1");
  const Index count = n_steps / record_every + 1;
  Mat states(res.neurons(), count);
  Mat outputs(W.outputs(), count);
  Vec r = r0;
  evolve_autonomous_streaming(res, W, r, dt, n_steps, [&](Index i, const Vec& state) {
    if (i % record_every == 0) {
      states.col(i / record_every) = state;
      outputs.col(i / record_every).noalias() = W.W * state;
    }
  });
  const double rec_dt = dt * static_cast<double>(record_every);
  return AutonomousRun{Trajectory(std::move(states), rec_dt), Trajectory(std::move(outputs), rec_dt)};
}

ClosedLoopJacobian::ClosedLoopJacobian(const Reservoir& res, const OutputMatrix& W, const Vec& r)
    : res_(res), W_(W) {
  check_readout(res, W);
  if (r.size() != res.neurons()) throw ContractViolation("closed_loop_jacobian: state has wrong dimension");
  Vec u = res.A * r + res.B * (W.W * r) + res.d;
  tanh_inplace(u);
  gain_ = 1.0 - u.array().square();
}

void ClosedLoopJacobian::apply(const Mat& p, Mat& out) const {
  if (p.rows() != res_.neurons()) throw ContractViolation("closed_loop_jacobian: vector has wrong dimension");
  Mat wp = W_.W * p;
  out.noalias() = res_.A * p;
  out.noalias() += res_.B * wp;
  out = res_.gamma * (gain_.asDiagonal() * out - p);
}

Mat ClosedLoopJacobian::apply(const Mat& p) const {
  Mat out(p.rows(), p.cols());
  apply(p, out);
  return out;
}

Mat ClosedLoopJacobian::dense() const {
  if (res_.neurons() > 2000) throw ContractViolation("closed_loop_jacobian: dense form limited to N <= 2000");
  Mat m = Mat(res_.A) + res_.B * W_.W;
  m = gain_.asDiagonal() * m;
  m -= Mat::Identity(m.rows(), m.cols());
  return res_.gamma * m;
}

ClosedLoopJacobian closed_loop_jacobian(const Reservoir& res, const OutputMatrix& W, const Vec& r) {
  return ClosedLoopJacobian(res, W, r);
}

}  // namespace rcabs
