#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcabs/attractors.hpp"
#include "rcabs/lyapunov.hpp"
#include "rcabs/reservoir.hpp"
#include "rcabs/training.hpp"

namespace rcabs {

struct ClassificationRule {
  AttractorKind memory = AttractorKind::limit_cycle;
  double zero_tol = 0.1;
  double neg_threshold = -0.1;
  double pos_threshold = 0.3;

  void validate() const;
};

struct Classification {
  bool success = false;
  std::string reason;  // first violated clause; empty on success
};

/// limit cycle: |l1|, |l2| <= zero_tol and l3, l4 <= neg_threshold.
/// lorenz: l1 >= pos_threshold, |l2|, |l3| <= zero_tol, l4, l5 <= neg_threshold.
Classification classify_abstraction(const Vec& exponents, const ClassificationRule& rule);

struct SweepGrid {
  std::vector<double> gamma_values;
  std::vector<double> rho_values;
  AttractorKind memory = AttractorKind::limit_cycle;
  ReservoirParams reservoir;
  TrainingConfig training;
  LyapunovConfig lyapunov;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double prepare_s = 50.0;
  Index workers = 1;
  ClassificationRule rule;

  /// gamma 2.5..25 step 2.5, rho 0.2..2.0 step 0.2, paper constants elsewhere.
  static SweepGrid defaults(AttractorKind memory);
  void validate() const;
};

struct CellRecord {
  double gamma = 0.0;
  double rho = 0.0;
  double input_scale = 0.0;
  double bias_scale = 0.0;
  Index row = 0;     // gamma index (or swept-value index)
  Index column = 0;  // rho index
  Index seed_index = 0;
  std::uint64_t seed = 0;  // derived per-cell seed
  Vec exponents;
  bool success = false;
  std::string failure_reason;
  double wall_time_s = 0.0;
};

struct SweepResult {
  std::vector<double> gamma_values;
  std::vector<double> rho_values;
  std::vector<std::uint64_t> seeds;
  std::string param;  // empty for gamma x rho; otherwise the swept parameter
  std::vector<double> param_values;
  std::vector<CellRecord> records;  // grid order: row, column, seed
};

/// base_seed xor a hash of the grid position.
std::uint64_t cell_seed(std::uint64_t base_seed, Index row, Index column);

/// One cell: build, train on all shifts, prepare on c = 0, leading exponents,
/// classify. Numerical failures become part of the record.
CellRecord run_cell(const SweepGrid& grid, const ReservoirParams& params, std::uint64_t seed);

SweepResult run_sweep(const SweepGrid& grid);

enum class ScalarParam { input_scale, bias_scale };
std::string to_string(ScalarParam param);
ScalarParam parse_scalar_param(const std::string& name);

/// One-dimensional sweep at the grid's first gamma and rho.
SweepResult sweep_scalar_param(ScalarParam param, const std::vector<double>& values, const SweepGrid& fixed);

double median(std::vector<double> values);

/// matrix_csv: rows gamma, columns rho, cells the median of exponent i
/// (1-based) across seeds. long_csv: gamma,rho,seed,lambda_i,success.
void export_heatmap(const SweepResult& result, Index exponent_index, std::ostream& matrix_csv,
                    std::ostream& long_csv);

/// Every record with all exponents.
void write_records_csv(const SweepResult& result, std::ostream& out);

/// Values lo, lo+step, ..., hi (inclusive, rounded to 12 decimals).
std::vector<double> parse_range(const std::string& spec);

}  // namespace rcabs
