#pragma once

#include <cstdint>
#include <optional>

#include "rcabs/attractors.hpp"
#include "rcabs/lyapunov.hpp"
#include "rcabs/reservoir.hpp"
#include "rcabs/training.hpp"

namespace rcabs {

/// Reservoir + trained readout for one attractor memory family.
struct TrainedSystem {
  AttractorSpec attractor;
  TrainingConfig training;
  Reservoir reservoir;
  OutputMatrix readout;
  TrainingError fit;
  double rcond = 0.0;
  std::optional<TrainingSet> training_set;
};

TrainedSystem train_system(const AttractorSpec& spec, const ReservoirParams& params, const TrainingConfig& cfg,
                           bool keep_training_set = false);

/// Drives a random initial state with the attractor shifted by c for
/// prepare_s (after the attractor's own transient) and returns the final state.
Vec prepare_state(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg, double c,
                  double prepare_s, std::uint64_t seed);

/// Leading exponents of the closed-loop reservoir along an orbit prepared on
/// the memory at shift c.
LyapunovResult closed_loop_spectrum(const Reservoir& res, const OutputMatrix& W, const AttractorSpec& spec,
                                    const TrainingConfig& cfg, const LyapunovConfig& lyap, double c,
                                    double prepare_s, std::uint64_t seed);

/// Exponent count used to classify a memory: 4 for the limit cycle, 5 for Lorenz.
Index classification_exponents(AttractorKind kind);

/// Reduced sizes for quick runs: N = 300, learn 50 s, measure 50 s.
void apply_desk_scale(ReservoirParams& reservoir, TrainingConfig& training, LyapunovConfig& lyapunov);

}  // namespace rcabs
