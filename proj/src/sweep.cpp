#include "rcabs/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "rcabs/errors.hpp"
#include "rcabs/pipeline.hpp"
#include "rcabs/rng.hpp"
#include "rcabs/trajectory.hpp"

namespace rcabs {
namespace {

std::string label(int i) {
  static const char* subscripts[] = {"₀", "₁", "₂", "₃", "₄", "₅", "₆", "₇", "₈", "₉"};
  return std::string("λ") + subscripts[i];
}

double rounded(double v) { return std::round(v * 1e12) / 1e12; }

struct Job {
  Index row;
  Index column;
  Index seed_index;
  ReservoirParams params;
};

SweepResult execute(const SweepGrid& grid, std::vector<Job> jobs, SweepResult result) {
  std::set<std::uint64_t> used;
  for (const auto& job : jobs) {
    if (!used.insert(job.params.seed).second) {
      throw NumericalError("sweep: derived cell seeds collide; choose different base seeds");
    }
  }
  result.records.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job& job = jobs[j];
      CellRecord rec = run_cell(grid, job.params, job.params.seed);
      rec.row = job.row;
      rec.column = job.column;
      rec.seed_index = job.seed_index;
      result.records[j] = std::move(rec);
    }
  };
  const Index width = std::max<Index>(1, std::min<Index>(grid.workers, static_cast<Index>(jobs.size())));
  std::vector<std::thread> pool;
  for (Index w = 1; w < width; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return result;
}

}  // namespace

void ClassificationRule::validate() const {
  if (!(zero_tol > 0.0)) throw ContractViolation("zero_tol must be positive");
  if (!(neg_threshold < 0.0 && pos_threshold > 0.0)) {
    throw ContractViolation("thresholds must satisfy neg_threshold < 0 < pos_threshold");
  }
}

Classification classify_abstraction(const Vec& l, const ClassificationRule& rule) {
  rule.validate();
  const Index needed = classification_exponents(rule.memory);
  if (l.size() < needed) {
    throw ContractViolation("classify_abstraction: " + to_string(rule.memory) + " needs " + std::to_string(needed) +
                            " exponents, got " + std::to_string(l.size()));
  }
  auto zero = [&](int i) { return std::abs(l[i - 1]) <= rule.zero_tol; };
  auto negative = [&](int i) { return l[i - 1] <= rule.neg_threshold; };

  if (rule.memory == AttractorKind::limit_cycle) {
    for (int i : {1, 2}) {
      if (!zero(i)) return {false, label(i) + " not zero"};
    }
    for (int i : {3, 4}) {
      if (!negative(i)) return {false, label(i) + " not negative"};
    }
    return {true, ""};
  }
  if (!(l[0] >= rule.pos_threshold)) return {false, label(1) + " not positive"};
  for (int i : {2, 3}) {
    if (!zero(i)) return {false, label(i) + " not zero"};
  }
  for (int i : {4, 5}) {
    if (!negative(i)) return {false, label(i) + " not negative"};
  }
  return {true, ""};
}

SweepGrid SweepGrid::defaults(AttractorKind memory) {
  SweepGrid grid;
  grid.memory = memory;
  grid.rule.memory = memory;
  grid.gamma_values = parse_range("2.5:25:2.5");
  grid.rho_values = parse_range("0.2:2.0:0.2");
  grid.lyapunov.k_exponents = classification_exponents(memory);
  return grid;
}

void SweepGrid::validate() const {
  if (gamma_values.empty() || rho_values.empty()) throw ContractViolation("sweep axes must be nonempty");
  for (double v : gamma_values) {
    if (!(v > 0.0)) throw ContractViolation("sweep gamma values must be positive");
  }
  for (double v : rho_values) {
    if (!(v > 0.0)) throw ContractViolation("sweep rho values must be positive");
  }
  if (seeds.empty()) throw ContractViolation("sweep needs at least one seed");
  if (workers < 1) throw ContractViolation("sweep workers must be >= 1");
  if (rule.memory != memory) throw ContractViolation("classification rule memory kind differs from the grid");
  rule.validate();
  if (lyapunov.k_exponents < classification_exponents(memory)) {
    throw ContractViolation("sweep needs at least " + std::to_string(classification_exponents(memory)) +
                            " exponents for " + to_string(memory));
  }
}

std::uint64_t cell_seed(std::uint64_t base_seed, Index row, Index column) {
  const std::uint64_t position = (static_cast<std::uint64_t>(row) << 32) ^ static_cast<std::uint64_t>(column);
  return base_seed ^ splitmix64(position);
}

CellRecord run_cell(const SweepGrid& grid, const ReservoirParams& params, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  CellRecord rec;
  rec.gamma = params.gamma;
  rec.rho = params.spectral_radius;
  rec.input_scale = params.input_scale;
  rec.bias_scale = params.bias_scale;
  rec.seed = seed;
  rec.exponents = Vec::Constant(grid.lyapunov.k_exponents, std::numeric_limits<double>::quiet_NaN());
  const AttractorSpec spec{grid.memory};
  const auto& shifts = grid.training.shifts;
  const double c = std::find(shifts.begin(), shifts.end(), 0.0) != shifts.end() ? 0.0 : shifts.front();
  try {
    ReservoirParams p = params;
    p.seed = seed;
    const TrainedSystem sys = train_system(spec, p, grid.training);
    const LyapunovResult lyap =
        closed_loop_spectrum(sys.reservoir, sys.readout, spec, grid.training, grid.lyapunov, c, grid.prepare_s, seed);
    rec.exponents = lyap.exponents;
    const Classification cls = classify_abstraction(rec.exponents, grid.rule);
    rec.success = cls.success;
    rec.failure_reason = cls.reason;
  } catch (const Error& e) {
    rec.success = false;
    rec.failure_reason = std::string("error: ") + e.what();
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

SweepResult run_sweep(const SweepGrid& grid) {
  grid.validate();
  std::vector<Job> jobs;
  for (std::size_t gi = 0; gi < grid.gamma_values.size(); ++gi) {
    for (std::size_t ri = 0; ri < grid.rho_values.size(); ++ri) {
      for (std::size_t si = 0; si < grid.seeds.size(); ++si) {
        ReservoirParams p = grid.reservoir;
        p.gamma = grid.gamma_values[gi];
        p.spectral_radius = grid.rho_values[ri];
        p.seed = cell_seed(grid.seeds[si], static_cast<Index>(gi), static_cast<Index>(ri));
        jobs.push_back({static_cast<Index>(gi), static_cast<Index>(ri), static_cast<Index>(si), p});
      }
    }
  }
  SweepResult result;
  result.gamma_values = grid.gamma_values;
  result.rho_values = grid.rho_values;
  result.seeds = grid.seeds;
  return execute(grid, std::move(jobs), std::move(result));
}

std::string to_string(ScalarParam param) {
  return param == ScalarParam::input_scale ? "input_scale" : "bias_scale";
}

ScalarParam parse_scalar_param(const std::string& name) {
  if (name == "input_scale") return ScalarParam::input_scale;
  if (name == "bias_scale") return ScalarParam::bias_scale;
  throw ContractViolation("unknown sweep parameter '" + name + "' (expected input_scale or bias_scale)");
}

SweepResult sweep_scalar_param(ScalarParam param, const std::vector<double>& values, const SweepGrid& fixed) {
  fixed.validate();
  if (values.empty()) throw ContractViolation("scalar sweep needs at least one value");
  std::vector<Job> jobs;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    if (!(values[vi] > 0.0)) throw ContractViolation("scalar sweep values must be positive");
    for (std::size_t si = 0; si < fixed.seeds.size(); ++si) {
      ReservoirParams p = fixed.reservoir;
      p.gamma = fixed.gamma_values.front();
      p.spectral_radius = fixed.rho_values.front();
      (param == ScalarParam::input_scale ? p.input_scale : p.bias_scale) = values[vi];
      p.seed = cell_seed(fixed.seeds[si], static_cast<Index>(vi), 0);
      jobs.push_back({static_cast<Index>(vi), 0, static_cast<Index>(si), p});
    }
  }
  SweepResult result;
  result.gamma_values = {fixed.gamma_values.front()};
  result.rho_values = {fixed.rho_values.front()};
  result.seeds = fixed.seeds;
  result.param = to_string(param);
  result.param_values = values;
  return execute(fixed, std::move(jobs), std::move(result));
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }), values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

void export_heatmap(const SweepResult& result, Index exponent_index, std::ostream& matrix_csv,
                    std::ostream& long_csv) {
  if (!result.param.empty()) throw ContractViolation("export_heatmap: scalar sweeps have no gamma x rho grid");
  for (const auto& rec : result.records) {
    if (exponent_index < 1 || exponent_index > rec.exponents.size()) {
      throw ContractViolation("export_heatmap: exponent index " + std::to_string(exponent_index) + " out of range");
    }
  }
  const Index i = exponent_index - 1;
  const std::size_t rows = result.gamma_values.size();
  const std::size_t cols = result.rho_values.size();
  std::vector<std::vector<double>> cells(rows * cols);
  for (const auto& rec : result.records) {
    cells[static_cast<std::size_t>(rec.row) * cols + static_cast<std::size_t>(rec.column)].push_back(rec.exponents[i]);
  }

  matrix_csv << "gamma\\rho";
  for (double rho : result.rho_values) matrix_csv << ',' << format_double(rho);
  matrix_csv << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    matrix_csv << format_double(result.gamma_values[r]);
    for (std::size_t c = 0; c < cols; ++c) matrix_csv << ',' << format_double(median(cells[r * cols + c]));
    matrix_csv << '\n';
  }

  long_csv << "gamma,rho,seed,lambda_" << exponent_index << ",success\n";
  for (const auto& rec : result.records) {
    long_csv << format_double(rec.gamma) << ',' << format_double(rec.rho) << ','
             << result.seeds[static_cast<std::size_t>(rec.seed_index)] << ',' << format_double(rec.exponents[i]) << ','
             << (rec.success ? "true" : "false") << '\n';
  }
}

void write_records_csv(const SweepResult& result, std::ostream& out) {
  Index k = 0;
  for (const auto& rec : result.records) k = std::max(k, rec.exponents.size());
  out << "gamma,rho,input_scale,bias_scale,base_seed,cell_seed";
  for (Index i = 1; i <= k; ++i) out << ",lambda_" << i;
  out << ",success,failure_reason,wall_time_s\n";
  for (const auto& rec : result.records) {
    out << format_double(rec.gamma) << ',' << format_double(rec.rho) << ',' << format_double(rec.input_scale) << ','
        << format_double(rec.bias_scale) << ',' << result.seeds[static_cast<std::size_t>(rec.seed_index)] << ','
        << rec.seed;
    for (Index i = 0; i < k; ++i) {
      out << ',' << (i < rec.exponents.size() ? format_double(rec.exponents[i]) : std::string("nan"));
    }
    std::string reason = rec.failure_reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    out << ',' << (rec.success ? "true" : "false") << ',' << reason << ',' << format_double(rec.wall_time_s) << '\n';
  }
}

std::vector<double> parse_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid range '" + spec + "' (expected lo:hi:step)");
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3) throw ConfigError("invalid range '" + spec + "' (expected lo:hi:step)");
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(step > 0.0) || hi < lo) throw ConfigError("invalid range '" + spec + "': need step > 0 and hi >= lo");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> values;
  for (std::size_t i = 0; i < count; ++i) values.push_back(rounded(lo + static_cast<double>(i) * step));
  return values;
}

}  // namespace rcabs
