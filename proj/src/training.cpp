#include <limits>
#include "rcabs/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "rcabs/errors.hpp"
#include "rcabs/rng.hpp"

namespace rcabs {
namespace {

constexpr Index kChunk = 1024;

Index steps_for(double seconds, double dt) { return static_cast<Index>(std::llround(seconds / dt)); }

TrainingSegment empty_segment(double shift, Index begin, Index n, Index k) {
  TrainingSegment seg;
  seg.shift = shift;
  seg.begin = begin;
  seg.end = begin;
  seg.gram = Mat::Zero(n, n);
  seg.cross = Mat::Zero(k, n);
  seg.input_sq = Vec::Zero(k);
  seg.state_sum = Vec::Zero(n);
  seg.input_sum = Vec::Zero(k);
  return seg;
}

void accumulate(TrainingSegment& seg, const Eigen::Ref<const Mat>& r, const Eigen::Ref<const Mat>& x) {
  seg.gram.selfadjointView<Eigen::Lower>().rankUpdate(r);
  seg.cross.noalias() += x * r.transpose();
  seg.input_sq += x.rowwise().squaredNorm();
  seg.state_sum += r.rowwise().sum();
  seg.input_sum += x.rowwise().sum();
  seg.end += r.cols();
}

void finish(TrainingSegment& seg) {
  seg.gram.triangularView<Eigen::StrictlyUpper>() = seg.gram.transpose();
}

// Totals are summed in segment order so the result does not depend on the
// order in which segments were produced.
void reduce(TrainingSet& ts) {
  ts.gram = Mat::Zero(ts.neurons, ts.neurons);
  ts.cross = Mat::Zero(ts.inputs, ts.neurons);
  ts.input_sq = Vec::Zero(ts.inputs);
  for (const auto& seg : ts.segments) {
    ts.gram += seg.gram;
    ts.cross += seg.cross;
    ts.input_sq += seg.input_sq;
  }
}

Vec rmse_from_statistics(const Mat& W, const Mat& gram, const Mat& cross, const Vec& input_sq, Index cols) {
  Vec out(W.rows());
  for (Index c = 0; c < W.rows(); ++c) {
    const double quad = W.row(c).dot(gram * W.row(c).transpose());
    const double sse = input_sq[c] - 2.0 * W.row(c).dot(cross.row(c)) + quad;
    out[c] = std::sqrt(std::max(sse, 0.0) / static_cast<double>(cols));
  }
  return out;
}

}  // namespace

Index TrainingConfig::transient_steps() const { return steps_for(transient_s, dt); }
Index TrainingConfig::learn_steps() const { return steps_for(learn_s, dt); }

Vec TrainingConfig::direction(Index k) const {
  if (shift_direction.size() == 0) return Vec::Ones(k) / std::sqrt(static_cast<double>(k));
  return shift_direction;
}

Vec TrainingConfig::attractor_start(const AttractorSpec& spec) const {
  return initial_state.size() == 0 ? spec.default_initial_state() : initial_state;
}

void TrainingConfig::validate(Index k) const {
  if (!(transient_s > 0.0)) throw ContractViolation("training.transient_s must be positive");
  if (!(learn_s > 0.0)) throw ContractViolation("training.learn_s must be positive");
  if (!(dt > 0.0)) throw ContractViolation("training.dt must be positive");
  if (learn_steps() < 1) throw ContractViolation("training.learn_s is shorter than one step");
  if (shifts.empty()) throw ContractViolation("training.shifts must not be empty");
  if (std::set<double>(shifts.begin(), shifts.end()).size() != shifts.size()) {
    throw ContractViolation("training.shifts must be distinct");
  }
  if (!(ridge_beta >= 0.0)) throw ContractViolation("training.ridge_beta must be nonnegative");
  const Vec a = direction(k);
  if (a.size() != k) {
    throw ContractViolation("training.shift_direction has dimension " + std::to_string(a.size()) +
                            ", attractor has " + std::to_string(k));
  }
  if (a.norm() == 0.0) throw ContractViolation("training.shift_direction must be nonzero");
  if (initial_state.size() != 0 && initial_state.size() != k) {
    throw ContractViolation("training.initial_state has wrong dimension");
  }
}

const TrainingSegment& TrainingSet::segment(double shift) const {
  for (const auto& seg : segments) {
    if (seg.shift == shift) return seg;
  }
  throw ContractViolation("training set has no segment for shift " + std::to_string(shift));
}

TrainingSet make_training_set(const Mat& R, const Mat& X, std::vector<SegmentRange> ranges) {
  if (R.cols() != X.cols()) throw ContractViolation("make_training_set: R and X column counts differ");
  if (R.cols() < 1) throw ContractViolation("make_training_set: no columns");
  if (ranges.empty()) ranges.push_back({0.0, 0, R.cols()});
  TrainingSet ts;
  ts.neurons = R.rows();
  ts.inputs = X.rows();
  Index expected = 0;
  for (const auto& range : ranges) {
    if (range.begin != expected || range.end <= range.begin || range.end > R.cols()) {
      throw ContractViolation("make_training_set: segment ranges must partition the columns");
    }
    expected = range.end;
    TrainingSegment seg = empty_segment(range.shift, range.begin, ts.neurons, ts.inputs);
    accumulate(seg, R.middleCols(range.begin, range.end - range.begin),
               X.middleCols(range.begin, range.end - range.begin));
    finish(seg);
    ts.segments.push_back(std::move(seg));
  }
  if (expected != R.cols()) throw ContractViolation("make_training_set: segment ranges must cover all columns");
  reduce(ts);
  ts.states = R;
  ts.targets = X;
  return ts;
}

void replay_learning_phase(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg,
                           const LearningObserver& observe) {
  const Index k = spec.dimension();
  cfg.validate(k);
  if (res.inputs() != k) {
    throw ContractViolation("training: reservoir has " + std::to_string(res.inputs()) +
                            " inputs, attractor has dimension " + std::to_string(k));
  }
  const Index skip = cfg.transient_steps();
  const Index learn = cfg.learn_steps();
  const Vec a = cfg.direction(k);
  const Trajectory base = integrate(spec, cfg.attractor_start(spec), cfg.dt, skip + learn - 1);

  for (std::size_t s = 0; s < cfg.shifts.size(); ++s) {
    const double c = cfg.shifts[s];
    const Trajectory input = shift(base, ShiftSpec{a, c});
    Vec r = uniform_state(res.neurons(), substream_seed(res.params.seed, Stream::initial_state, s));
    try {
      drive_streaming(res, input, r, [&](Index i, const Vec& state) {
        if (i >= skip) observe(s, i - skip, input.state(i), state);
      });
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " while driving shift c=" + std::to_string(c), e.step());
    }
  }
}

TrainingSet assemble_training_set(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg) {
  const Index k = spec.dimension();
  const Index n = res.neurons();
  const Index learn = cfg.learn_steps();

  TrainingSet ts;
  ts.neurons = n;
  ts.inputs = k;
  const Index total = learn * static_cast<Index>(cfg.shifts.size());
  if (cfg.keep_columns) {
    ts.states.resize(n, total);
    ts.targets.resize(k, total);
  }

  Mat r_chunk(n, kChunk);
  Mat x_chunk(k, kChunk);
  Index filled = 0;
  auto flush = [&]() {
    if (filled > 0) accumulate(ts.segments.back(), r_chunk.leftCols(filled), x_chunk.leftCols(filled));
    filled = 0;
  };
  replay_learning_phase(res, spec, cfg, [&](std::size_t s, Index i, const Vec& x, const Vec& state) {
    if (i == 0) {
      if (!ts.segments.empty()) {
        flush();
        finish(ts.segments.back());
      }
      ts.segments.push_back(empty_segment(cfg.shifts[s], static_cast<Index>(s) * learn, n, k));
    }
    TrainingSegment& seg = ts.segments.back();
    r_chunk.col(filled) = state;
    x_chunk.col(filled) = x;
    if (cfg.keep_columns) {
      ts.states.col(seg.begin + i) = state;
      ts.targets.col(seg.begin + i) = x;
    }
    if (++filled == kChunk) flush();
  });
  flush();
  finish(ts.segments.back());
  reduce(ts);
  return ts;
}

ReadoutFit fit_readout(const TrainingSet& ts, double ridge_beta) {
  if (!(ridge_beta >= 0.0)) throw ContractViolation("ridge_beta must be nonnegative");
  if (ts.columns() < 1) throw ContractViolation("training set is empty");
  if (ts.columns() < ts.neurons) {
    std::clog << "warning: training set has " << ts.columns() << " samples for " << ts.neurons
              << " neurons; the readout is underdetermined without ridge\n";
  }
  Mat normal = ts.gram;
  normal.diagonal().array() += ridge_beta;
  Eigen::LDLT<Mat> ldlt(normal);
  if (ldlt.info() != Eigen::Success) throw NumericalError("normal matrix factorization failed");
  const Vec diag = ldlt.vectorD().cwiseAbs();
  const double tiny = diag.maxCoeff() * static_cast<double>(ts.neurons) *
                      std::numeric_limits<double>::epsilon();
  if (ridge_beta == 0.0 && (diag.maxCoeff() == 0.0 || diag.minCoeff() <= tiny)) {
    throw RankDeficiencyError("normal matrix R R^T is singular; use ridge_beta > 0");
  }
  ReadoutFit fit;
  fit.readout.W = ldlt.solve(ts.cross.transpose()).transpose();
  fit.rcond = ldlt.rcond();
  if (!fit.readout.W.allFinite()) throw NumericalError("readout solve produced non-finite weights");
  return fit;
}

OutputMatrix train_output_matrix(const TrainingSet& ts, double ridge_beta) {
  return fit_readout(ts, ridge_beta).readout;
}

TrainingError training_error(const OutputMatrix& W, const TrainingSet& ts) {
  if (W.outputs() != ts.inputs || W.neurons() != ts.neurons) {
    throw ContractViolation("training_error: output matrix shape does not match training set");
  }
  TrainingError err;
  if (ts.has_columns()) {
    const Mat residual = W.W * ts.states - ts.targets;
    err.rmse = (residual.rowwise().squaredNorm() / static_cast<double>(ts.columns())).cwiseSqrt();
    for (const auto& seg : ts.segments) {
      const auto block = residual.middleCols(seg.begin, seg.columns());
      err.segment_rmse.push_back((block.rowwise().squaredNorm() / static_cast<double>(seg.columns())).cwiseSqrt());
    }
    return err;
  }
  err.rmse = rmse_from_statistics(W.W, ts.gram, ts.cross, ts.input_sq, ts.columns());
  for (const auto& seg : ts.segments) {
    err.segment_rmse.push_back(rmse_from_statistics(W.W, seg.gram, seg.cross, seg.input_sq, seg.columns()));
  }
  return err;
}

double normal_equation_residual(const TrainingSet& ts, const OutputMatrix& W, double ridge_beta) {
  Mat lhs = ts.gram * W.W.transpose() + ridge_beta * W.W.transpose();
  const Mat rhs = ts.cross.transpose();
  return (lhs - rhs).cwiseAbs().maxCoeff() / rhs.cwiseAbs().maxCoeff();
}

}  // namespace rcabs
