#include "rcabs/abstraction.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "rcabs/errors.hpp"
#include "rcabs/numeric.hpp"
#include "rcabs/rng.hpp"

namespace rcabs {
namespace {

constexpr double kOutputBound = 1e3;
constexpr Index kReferencePoints = 2000;
constexpr Index kResidualStride = 100;

Index steps_for(double seconds, double dt) { return static_cast<Index>(std::llround(seconds / dt)); }

// Shared RK4 for dr' = gamma (dg o (A dr + B dx(dr)) - dr).
template <class Forcing>
PerturbationTrajectory evolve(const LinearizedSystem& lin, const Vec& dr0, Forcing&& forcing,
                              PerturbationSource source) {
  const Reservoir& res = lin.reservoir();
  const Index n = res.neurons();
  if (dr0.size() != n) throw ContractViolation("perturbation initial state has wrong dimension");
  const double dt = lin.dt();
  const double gamma = res.gamma;

  PerturbationTrajectory out;
  out.dr.resize(n, lin.length());
  out.dt = dt;
  out.t0 = lin.base_states().t0();
  out.source = source;
  out.dr.col(0) = dr0;

  Vec dr = dr0;
  Vec k1(n), k2(n), k3(n), k4(n), tmp(n), ax(n);
  auto rhs = [&](const Vec& g, const Vec& v, Vec& result) {
    ax.noalias() = res.A * v;
    ax.noalias() += res.B * forcing(v);
    result = gamma * (g.cwiseProduct(ax) - v);
  };
  for (Index i = 0; i + 1 < lin.length(); ++i) {
    const Vec g0 = lin.stage_gain(i, 0.0);
    const Vec gh = lin.stage_gain(i, 0.5);
    const Vec g1 = lin.stage_gain(i, 1.0);
    rhs(g0, dr, k1);
    tmp = dr + 0.5 * dt * k1;
    rhs(gh, tmp, k2);
    tmp = dr + 0.5 * dt * k2;
    rhs(gh, tmp, k3);
    tmp = dr + dt * k3;
    rhs(g1, tmp, k4);
    dr += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!bounded(dr)) throw DivergenceError("perturbation diverged", static_cast<long>(i + 1));
    out.dr.col(i + 1) = dr;
  }
  return out;
}

struct OpenLoopBase {
  Trajectory inputs;
  Trajectory states;
};

// Attractor transient discarded, reservoir prepared for prepare_s, then
// base_s of synchronized (r0, x0) recorded at every step.
OpenLoopBase open_loop_base(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg,
                            double prepare_s, double base_s, std::uint64_t seed) {
  const double dt = cfg.dt;
  const Index skip = cfg.transient_steps();
  const Index prep = steps_for(prepare_s, dt);
  const Index base = steps_for(base_s, dt);
  const Trajectory x = integrate(spec, cfg.attractor_start(spec), dt, skip + prep + base);
  Vec r = uniform_state(res.neurons(), substream_seed(seed, Stream::prepare_state, 0));
  if (prep > 0) drive_streaming(res, x.slice(skip, skip + prep + 1), r, [](Index, const Vec&) {});
  Trajectory inputs = x.slice(skip + prep, skip + prep + base + 1);
  Trajectory states = drive(res, inputs, r);
  return OpenLoopBase{std::move(inputs), std::move(states)};
}

double max_relative_deviation(const Mat& reference, const Mat& candidate, Index begin) {
  double worst = 0.0;
  for (Index i = begin; i < reference.cols(); ++i) {
    const double denom = reference.col(i).norm();
    if (denom == 0.0) continue;
    worst = std::max(worst, (candidate.col(i) - reference.col(i)).norm() / denom);
  }
  return worst;
}

double fd_deviation(const Reservoir& res, const OpenLoopBase& base, const PerturbationTrajectory& unit,
                    const Vec& a, double dc, Index begin) {
  const Trajectory shifted = shift(base.inputs, ShiftSpec{a, dc});
  const Trajectory perturbed = drive(res, shifted, base.states.state(0));
  const Mat fd = (perturbed.states() - base.states.states()) / dc;
  return max_relative_deviation(unit.dr, fd, begin);
}

}  // namespace

LinearizedSystem::LinearizedSystem(const Reservoir& res, Trajectory base_states, Trajectory base_inputs)
    : res_(res), states_(std::move(base_states)), inputs_(std::move(base_inputs)) {
  if (states_.dimension() != res.neurons()) throw ContractViolation("linearize_along: state dimension mismatch");
  if (inputs_->dimension() != res.inputs()) throw ContractViolation("linearize_along: input dimension mismatch");
  if (inputs_->length() != states_.length() || std::abs(inputs_->dt() - states_.dt()) > 1e-15 * states_.dt()) {
    throw ContractViolation("linearize_along: state and input trajectories are not aligned");
  }
}

LinearizedSystem::LinearizedSystem(const Reservoir& res, Trajectory base_states, const OutputMatrix& W)
    : res_(res), states_(std::move(base_states)), feedback_(W.W) {
  if (states_.dimension() != res.neurons()) throw ContractViolation("linearize_along: state dimension mismatch");
  if (W.neurons() != res.neurons() || W.outputs() != res.inputs()) {
    throw ContractViolation("linearize_along: output matrix shape does not match reservoir");
  }
}

Vec LinearizedSystem::stage_gain(Index i, double theta) const {
  auto at = [&](const Trajectory& traj) -> Vec {
    if (theta == 0.0 || i + 1 >= length()) return traj.state(i);
    if (theta == 1.0) return traj.state(i + 1);
    if (theta == 0.5) return traj.midpoint(i);
    return (1.0 - theta) * traj.state(i) + theta * traj.state(i + 1);
  };
  const Vec r = at(states_);
  Vec u = res_.A * r + res_.d;
  if (feedback_) {
    u.noalias() += res_.B * (*feedback_ * r);
  } else {
    u.noalias() += res_.B * at(*inputs_);
  }
  tanh_inplace(u);
  return 1.0 - u.array().square();
}

Mat LinearizedSystem::state_matrix(Index i) const {
  const Vec g = gain(i);
  Mat m = g.asDiagonal() * Mat(res_.A);
  m -= Mat::Identity(m.rows(), m.cols());
  return res_.gamma * m;
}

Mat LinearizedSystem::input_matrix(Index i) const { return res_.gamma * (gain(i).asDiagonal() * res_.B); }

LinearizedSystem linearize_along(const Reservoir& res, const Trajectory& r0, const Trajectory& x0) {
  return LinearizedSystem(res, r0, x0);
}

PerturbationTrajectory PerturbationTrajectory::tail(Index begin) const {
  if (begin < 0 || begin >= length()) throw ContractViolation("perturbation tail out of range");
  PerturbationTrajectory out;
  out.dr = dr.rightCols(length() - begin);
  out.dt = dt;
  out.t0 = t0 + static_cast<double>(begin) * dt;
  out.source = source;
  return out;
}

PerturbationTrajectory evolve_input_perturbation(const LinearizedSystem& lin, const Vec& a, double dc,
                                                 const Vec& dr0) {
  if (a.size() != lin.reservoir().inputs()) throw ContractViolation("shift direction has wrong dimension");
  const Vec dx = a * dc;
  return evolve(lin, dr0, [&](const Vec&) -> const Vec& { return dx; }, PerturbationSource::input_shift);
}

PerturbationTrajectory evolve_feedback_perturbation(const LinearizedSystem& lin, const OutputMatrix& W,
                                                    const Vec& dr0) {
  if (W.neurons() != lin.reservoir().neurons() || W.outputs() != lin.reservoir().inputs()) {
    throw ContractViolation("output matrix shape does not match reservoir");
  }
  return evolve(lin, dr0, [&](const Vec& v) -> Vec { return W.W * v; }, PerturbationSource::feedback);
}

double differential_map_residual(const OutputMatrix& W, const PerturbationTrajectory& dr, const Vec& a, double dc) {
  if (dc == 0.0) throw ContractViolation("differential_map_residual: dc must be nonzero");
  if (a.size() != W.outputs() || dr.dr.rows() != W.neurons()) {
    throw ContractViolation("differential_map_residual: shape mismatch");
  }
  if (dr.length() < 1) throw ContractViolation("differential_map_residual: empty perturbation trajectory");
  const Vec target = a * dc;
  const Mat mapped = (W.W * dr.dr).colwise() - target;
  return mapped.colwise().norm().mean() / target.norm();
}

Vec delta_r(const PerturbationTrajectory& dr) {
  const Index len = dr.length();
  if (len < 1) throw ContractViolation("delta_r: empty perturbation trajectory");
  if (len == 1) return dr.dr.col(0);
  Vec sum = dr.dr.rowwise().sum();
  sum -= 0.5 * (dr.dr.col(0) + dr.dr.col(len - 1));
  return sum / static_cast<double>(len - 1);
}

double log_growth_rate(const PerturbationTrajectory& dr, double settle_s) {
  const Index len = dr.length();
  Index begin = std::clamp<Index>(static_cast<Index>(std::llround(settle_s / dr.dt)), 0, len - 1);
  if (begin >= len - 1) throw ContractViolation("log_growth_rate: settle window covers the whole trajectory");
  const double start = dr.dr.col(begin).norm();
  const double end = dr.dr.col(len - 1).norm();
  if (start == 0.0 || end == 0.0) return -std::numeric_limits<double>::infinity();
  return (std::log(end) - std::log(start)) / (static_cast<double>(len - 1 - begin) * dr.dt);
}

Fig2cProjection project_fig2c(const std::vector<Trajectory>& trajectories, const Vec& delta, Index max_columns) {
  const double dnorm = delta.norm();
  if (!(dnorm > 0.0)) throw ContractViolation("project_fig2c: delta_r must be nonzero");
  if (trajectories.empty()) throw ContractViolation("project_fig2c: no trajectories");
  const Index n = delta.size();
  if (n < 3) throw NumericalError("project_fig2c: need at least three state dimensions");
  Index total = 0;
  for (const auto& traj : trajectories) {
    if (traj.dimension() != n) throw ContractViolation("project_fig2c: trajectory dimension mismatch");
    total += traj.length();
  }
  if (total < 2) throw NumericalError("project_fig2c: pooled data has fewer than two samples");
  const Index stride = std::max<Index>(1, (total + max_columns - 1) / max_columns);

  Fig2cProjection out;
  out.axis = delta / dnorm;
  const Vec& u = out.axis;

  // Pooled global sample index g is used when g % stride == 0.
  auto for_each_sample = [&](auto&& fn) {
    Index g = 0;
    for (const auto& traj : trajectories) {
      for (Index i = 0; i < traj.length(); ++i, ++g) {
        if (g % stride == 0) fn(traj.state(i));
      }
    }
  };

  Vec mean = Vec::Zero(n);
  Index used = 0;
  for_each_sample([&](const auto& r) {
    mean += r;
    ++used;
  });
  mean /= static_cast<double>(used);
  out.center = mean;

  Mat cov = Mat::Zero(n, n);
  constexpr Index chunk = 512;
  Mat block(n, chunk);
  Index filled = 0;
  auto flush = [&]() {
    if (filled == 0) return;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(block.leftCols(filled));
    filled = 0;
  };
  for_each_sample([&](const auto& r) {
    Vec y = r - mean;
    y -= u * u.dot(y);
    block.col(filled) = y;
    if (++filled == chunk) flush();
  });
  flush();
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();

  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("project_fig2c: eigendecomposition failed");
  const Vec& values = eig.eigenvalues();
  const double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);

  // Candidates: principal directions with nonzero variance, then canonical
  // vectors to complete the frame when the residual is rank deficient.
  Mat frame(n, 3);
  frame.col(0) = u;
  Index have = 1;
  auto try_add = [&](Vec v) {
    for (int pass = 0; pass < 2; ++pass) v -= frame.leftCols(have) * (frame.leftCols(have).transpose() * v);
    const double norm = v.norm();
    if (norm > 1e-8) frame.col(have++) = v / norm;
  };
  for (Index j = n - 1; j >= 0 && have < 3; --j) {
    if (values[j] <= 1e-12 * scale) break;
    try_add(eig.eigenvectors().col(j));
  }
  for (Index j = 0; j < n && have < 3; ++j) try_add(Vec::Unit(n, j));
  out.principal_axes = frame.rightCols(2);

  for (const auto& traj : trajectories) {
    Mat coords(3, traj.length());
    coords.row(0) = u.transpose() * traj.states();
    coords.bottomRows(2) = out.principal_axes.transpose() * (traj.states().colwise() - mean);
    out.coordinates.push_back(std::move(coords));
  }
  return out;
}

std::vector<double> default_test_shifts() {
  std::vector<double> shifts;
  for (int i = -19; i <= 19; ++i) shifts.push_back(static_cast<double>(i) / 10.0);
  return shifts;
}

std::vector<DriftRow> interpolation_test(const Reservoir& res, const OutputMatrix& W, const AttractorSpec& spec,
                                         const TrainingConfig& cfg, const std::vector<double>& test_shifts,
                                         const InterpolationOptions& opts) {
  const Index k = spec.dimension();
  cfg.validate(k);
  if (res.inputs() != k || W.outputs() != k || W.neurons() != res.neurons()) {
    throw ContractViolation("interpolation_test: reservoir, readout and attractor dimensions disagree");
  }
  const double dt = cfg.dt;
  const Vec a = cfg.direction(k);
  const Index skip = cfg.transient_steps();
  const Index learn = cfg.learn_steps();
  const Index prep = steps_for(opts.prepare_s, dt);
  const Index n_auto = steps_for(opts.autonomous_s, dt);
  const Index settle = steps_for(opts.settle_s, dt);
  if (n_auto <= settle) throw ContractViolation("interpolation_test: autonomous run shorter than settle window");

  const Trajectory base = integrate(spec, cfg.attractor_start(spec), dt, skip + std::max(prep, learn));
  const Trajectory reference = base.slice(skip, skip + learn);
  const Vec base_mean = reference.mean();
  const Index ref_stride = std::max<Index>(1, reference.length() / kReferencePoints);
  Mat ref_points(k, (reference.length() + ref_stride - 1) / ref_stride);
  for (Index j = 0; j < ref_points.cols(); ++j) ref_points.col(j) = reference.state(j * ref_stride);
  const Trajectory prep_input = base.slice(skip, skip + prep + 1);

  std::vector<DriftRow> table;
  for (std::size_t idx = 0; idx < test_shifts.size(); ++idx) {
    DriftRow row;
    row.c = test_shifts[idx];
    const Vec offset = row.c * a;
    const Mat shifted_ref = ref_points.colwise() + offset;
    Vec r = uniform_state(res.neurons(), substream_seed(opts.seed, Stream::prepare_state, idx + 1));
    Vec out_sum = Vec::Zero(k);
    Index out_count = 0;
    double dist_sum = 0.0;
    Index dist_count = 0;
    double max_abs = 0.0;
    try {
      drive_streaming(res, shift(prep_input, ShiftSpec{a, row.c}), r, [](Index, const Vec&) {});
      evolve_autonomous_streaming(res, W, r, dt, n_auto, [&](Index i, const Vec& state) {
        if (i < settle || i % opts.record_every != 0) return;
        const Vec y = W.W * state;
        out_sum += y;
        ++out_count;
        max_abs = std::max(max_abs, y.cwiseAbs().maxCoeff());
        if (i % kResidualStride == 0) {
          dist_sum += std::sqrt((shifted_ref.colwise() - y).colwise().squaredNorm().minCoeff());
          ++dist_count;
        }
      });
      const Vec mean_out = out_sum / static_cast<double>(out_count);
      row.c_hat = (mean_out - base_mean).dot(a) / a.squaredNorm();
      row.residual = dist_count > 0 ? dist_sum / static_cast<double>(dist_count) : 0.0;
      row.bounded = std::isfinite(max_abs) && max_abs <= kOutputBound;
    } catch (const DivergenceError& e) {
      row.c_hat = std::numeric_limits<double>::quiet_NaN();
      row.residual = std::numeric_limits<double>::infinity();
      row.bounded = false;
      row.error = e.what();
    }
    table.push_back(std::move(row));
  }
  return table;
}

double linearization_error(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg, double dc,
                           const MechanismOptions& opts) {
  const Index k = spec.dimension();
  cfg.validate(k);
  const Vec a = cfg.direction(k);
  const OpenLoopBase base = open_loop_base(res, spec, cfg, opts.prepare_s, opts.burn_in_s + opts.window_s, opts.seed);
  const LinearizedSystem lin(res, base.states, base.inputs);
  const PerturbationTrajectory unit = evolve_input_perturbation(lin, a, 1.0, Vec::Zero(res.neurons()));
  return fd_deviation(res, base, unit, a, dc, steps_for(opts.burn_in_s, cfg.dt));
}

MechanismReport analyze_mechanism(const Reservoir& res, const OutputMatrix& W, const AttractorSpec& spec,
                                  const TrainingConfig& cfg, const MechanismOptions& opts) {
  const Index k = spec.dimension();
  cfg.validate(k);
  if (W.outputs() != k || W.neurons() != res.neurons()) {
    throw ContractViolation("analyze_mechanism: output matrix shape does not match");
  }
  const Vec a = cfg.direction(k);
  const Index n = res.neurons();
  const Index burn = steps_for(opts.burn_in_s, cfg.dt);

  MechanismReport report;
  Vec dr_end;
  Vec r_end;
  {
    const OpenLoopBase base =
        open_loop_base(res, spec, cfg, opts.prepare_s, opts.burn_in_s + opts.window_s, opts.seed);
    const LinearizedSystem lin(res, base.states, base.inputs);
    const PerturbationTrajectory unit = evolve_input_perturbation(lin, a, 1.0, Vec::Zero(n));
    report.fd_relative_error = fd_deviation(res, base, unit, a, opts.fd_dc, burn);
    const PerturbationTrajectory window = unit.tail(burn);
    report.differential_residual = differential_map_residual(W, window, a, 1.0);
    report.delta_r = delta_r(window);
    dr_end = unit.dr.col(unit.length() - 1);
    r_end = base.states.state(base.states.length() - 1);
  }

  const AutonomousRun autonomous = evolve_autonomous(res, W, r_end, cfg.dt, steps_for(opts.feedback_s, cfg.dt));
  const LinearizedSystem feedback(res, autonomous.states, W);
  report.feedback_growth_rate =
      log_growth_rate(evolve_feedback_perturbation(feedback, W, dr_end), opts.feedback_settle_s);

  std::mt19937_64 gen(substream_seed(opts.seed, Stream::probe, 0));
  std::normal_distribution<double> normal;
  Vec probe(n);
  for (Index i = 0; i < n; ++i) probe[i] = normal(gen);
  probe.normalize();
  report.random_growth_rate =
      log_growth_rate(evolve_feedback_perturbation(feedback, W, probe), 0.5 * opts.feedback_s);
  return report;
}

}  // namespace rcabs
