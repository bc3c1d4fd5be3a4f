#pragma once

#include <functional>
#include <vector>

#include "rcabs/attractors.hpp"
#include "rcabs/reservoir.hpp"
#include "rcabs/types.hpp"

namespace rcabs {

struct TrainingConfig {
  double transient_s = 50.0;
  double learn_s = 100.0;
  double dt = 0.001;
  std::vector<double> shifts{-2.0, -1.0, 0.0, 1.0, 2.0};
  Vec shift_direction;  // empty: normalized all-ones
  double ridge_beta = 1e-6;
  Vec initial_state;    // attractor start; empty: the kind's default
  bool keep_columns = false;

  Index transient_steps() const;
  Index learn_steps() const;
  Vec direction(Index k) const;
  Vec attractor_start(const AttractorSpec& spec) const;
  void validate(Index k) const;
};

/// One shifted memory's contribution. The sums run over its columns only.
struct TrainingSegment {
  double shift = 0.0;
  Index begin = 0;
  Index end = 0;
  Mat gram;       // sum r r^T
  Mat cross;      // sum x r^T
  Vec input_sq;   // sum x^2 per channel
  Vec state_sum;  // sum r
  Vec input_sum;  // sum x

  Index columns() const { return end - begin; }
  Vec mean_state() const { return state_sum / static_cast<double>(columns()); }
  Vec mean_input() const { return input_sum / static_cast<double>(columns()); }
};

/// Concatenated reservoir states R (N x T) and targets X (k x T), held as the
/// sufficient statistics of the least-squares problem. The raw columns are
/// kept only on request.
struct TrainingSet {
  Index neurons = 0;
  Index inputs = 0;
  std::vector<TrainingSegment> segments;
  Mat gram;
  Mat cross;
  Vec input_sq;
  Mat states;   // N x T when kept
  Mat targets;  // k x T when kept

  Index columns() const { return segments.empty() ? 0 : segments.back().end; }
  bool has_columns() const { return states.cols() == columns() && columns() > 0; }
  const TrainingSegment& segment(double shift) const;
};

struct SegmentRange {
  double shift;
  Index begin;
  Index end;
};

/// Builds a training set from explicit columns. Ranges must partition
/// [0, R.cols()); an empty list means a single segment with shift 0.
TrainingSet make_training_set(const Mat& R, const Mat& X, std::vector<SegmentRange> ranges = {});

using LearningObserver =
    std::function<void(std::size_t segment, Index sample, const Vec& input, const Vec& state)>;

/// Drives a fresh reservoir state from each shift's own substream through the
/// transient and learning phases; observe sees the learning-phase samples.
void replay_learning_phase(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg,
                           const LearningObserver& observe);

/// Drives a fresh reservoir state with each shifted copy of the attractor,
/// discards the transient and accumulates the remaining samples.
TrainingSet assemble_training_set(const Reservoir& res, const AttractorSpec& spec,
                                  const TrainingConfig& cfg);

struct ReadoutFit {
  OutputMatrix readout;
  double rcond = 0.0;  // reciprocal condition estimate of R R^T + beta I
};

/// W = X R^T (R R^T + beta I)^{-1} via a pivoted LDL^T factorization.
ReadoutFit fit_readout(const TrainingSet& ts, double ridge_beta);
OutputMatrix train_output_matrix(const TrainingSet& ts, double ridge_beta);

struct TrainingError {
  Vec rmse;                       // per channel, all columns
  std::vector<Vec> segment_rmse;  // per segment, per channel
};

TrainingError training_error(const OutputMatrix& W, const TrainingSet& ts);

/// max|(R R^T + beta I) W^T - R X^T| / max|R X^T|.
double normal_equation_residual(const TrainingSet& ts, const OutputMatrix& W, double ridge_beta);

}  // namespace rcabs
