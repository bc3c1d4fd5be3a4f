#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rcabs/abstraction.hpp"
#include "rcabs/attractors.hpp"
#include "rcabs/lyapunov.hpp"
#include "rcabs/reservoir.hpp"
#include "rcabs/sweep.hpp"
#include "rcabs/training.hpp"

namespace rcabs {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "RCABS_OUT_DIR";

struct PredictOptions {
  double duration_s = 500.0;
  double prepare_s = 50.0;
  bool prepare = true;  // open-loop preparation at prepare_shift before evolving
  double prepare_shift = 0.0;
  Index record_every = 10;
};

struct RunConfig {
  AttractorSpec attractor;
  ReservoirParams reservoir;
  TrainingConfig training;
  LyapunovConfig lyapunov;
  Index exponents = 0;  // 0: per-system default
  double lyapunov_prepare_s = 50.0;
  double lyapunov_shift = 0.0;
  PredictOptions predict;
  InterpolationOptions interpolation;
  std::vector<double> test_shifts = default_test_shifts();
  MechanismOptions mechanism;
  double mechanism_shift = 0.0;
  std::vector<double> project_shifts{-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  double project_duration_s = 20.0;
  Index project_record_every = 10;
  std::vector<double> sweep_gamma;
  std::vector<double> sweep_rho;
  Index sweep_seeds = 5;
  Index sweep_workers = 1;
  ClassificationRule rule;
  std::string output_dir;
  bool desk_scale = false;

  /// Base seeds for multi-seed runs: reservoir.seed, reservoir.seed + 1, ...
  std::vector<std::uint64_t> seed_list() const;
  SweepGrid sweep_grid() const;
};

using Setting = std::pair<std::string, std::string>;

/// Splits "section.key=value".
Setting parse_assignment(const std::string& text);

/// INI-style file: either "[section]" blocks or flat "section.key = value"
/// lines; '#' and ';' start comments. Duplicate keys are an error.
std::vector<Setting> read_config_file(const std::string& path);

/// Defaults, then desk-scale reductions (if run.desk_scale is set anywhere or
/// desk_scale is true), then the settings in order. Unknown keys and
/// malformed values throw ConfigError naming the key.
RunConfig resolve_config(const std::vector<Setting>& settings, bool desk_scale = false);

/// Every key with its resolved value, in table order.
std::vector<Setting> describe(const RunConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace rcabs
