#include "rcabs/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rcabs/errors.hpp"
#include "rcabs/pipeline.hpp"

namespace rcabs {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) throw std::invalid_argument("not a number");
  return v;
}

long long to_integer(const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) throw std::invalid_argument("not an integer");
  return v;
}

std::uint64_t to_unsigned(const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) throw std::invalid_argument("not an unsigned integer");
  return v;
}

bool to_bool(const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("not a boolean");
}

std::vector<double> to_list(const std::string& text) {
  std::vector<double> out;
  const std::string t = trim(text);
  if (t.empty()) return out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item));
  return out;
}

// A comma list, or a single lo:hi:step range.
std::vector<double> to_values(const std::string& text) {
  const std::string t = trim(text);
  if (t.find(':') != std::string::npos) return parse_range(t);
  return to_list(t);
}

Vec to_vec(const std::string& text) {
  const auto v = to_list(text);
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

std::string show(double v) { return format_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }

template <typename It>
std::string join(It begin, It end) {
  std::string out;
  for (It it = begin; it != end; ++it) {
    if (it != begin) out += ',';
    out += format_double(*it);
  }
  return out;
}
std::string show(const std::vector<double>& v) { return join(v.begin(), v.end()); }
std::string show(const Vec& v) { return join(v.data(), v.data() + v.size()); }

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RCABS_REAL(KEY, FIELD)                                                   \
  Entry { KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(v); }, \
          [](const RunConfig& c) { return show(c.FIELD); } }
#define RCABS_INT(KEY, FIELD)                                                                \
  Entry { KEY, [](RunConfig& c, const std::string& v) { c.FIELD = static_cast<Index>(to_integer(v)); }, \
          [](const RunConfig& c) { return std::to_string(c.FIELD); } }
#define RCABS_BOOL(KEY, FIELD)                                                 \
  Entry { KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(v); }, \
          [](const RunConfig& c) { return show(c.FIELD); } }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      {"attractor.kind", [](RunConfig& c, const std::string& v) { c.attractor.kind = parse_attractor_kind(trim(v)); },
       [](const RunConfig& c) { return to_string(c.attractor.kind); }},
      {"attractor.initial_state", [](RunConfig& c, const std::string& v) { c.training.initial_state = to_vec(v); },
       [](const RunConfig& c) { return show(c.training.initial_state); }},

      RCABS_INT("reservoir.n_neurons", reservoir.n_neurons),
      RCABS_REAL("reservoir.sparsity", reservoir.sparsity),
      RCABS_REAL("reservoir.spectral_radius", reservoir.spectral_radius),
      RCABS_REAL("reservoir.input_scale", reservoir.input_scale),
      RCABS_REAL("reservoir.bias_scale", reservoir.bias_scale),
      RCABS_REAL("reservoir.gamma", reservoir.gamma),
      {"reservoir.seed", [](RunConfig& c, const std::string& v) { c.reservoir.seed = to_unsigned(v); },
       [](const RunConfig& c) { return std::to_string(c.reservoir.seed); }},

      RCABS_REAL("training.transient_s", training.transient_s),
      RCABS_REAL("training.learn_s", training.learn_s),
      RCABS_REAL("training.dt", training.dt),
      {"training.shifts", [](RunConfig& c, const std::string& v) { c.training.shifts = to_values(v); },
       [](const RunConfig& c) { return show(c.training.shifts); }},
      {"training.shift_direction", [](RunConfig& c, const std::string& v) { c.training.shift_direction = to_vec(v); },
       [](const RunConfig& c) { return show(c.training.shift_direction); }},
      RCABS_REAL("training.ridge_beta", training.ridge_beta),

      RCABS_INT("lyapunov.exponents", exponents),
      RCABS_REAL("lyapunov.dt", lyapunov.dt),
      RCABS_REAL("lyapunov.transient_s", lyapunov.transient_s),
      RCABS_REAL("lyapunov.measure_s", lyapunov.measure_s),
      RCABS_INT("lyapunov.reorthonormalize_every", lyapunov.reorthonormalize_every),
      RCABS_REAL("lyapunov.prepare_s", lyapunov_prepare_s),
      RCABS_REAL("lyapunov.shift", lyapunov_shift),

      RCABS_REAL("predict.duration_s", predict.duration_s),
      RCABS_REAL("predict.prepare_s", predict.prepare_s),
      RCABS_BOOL("predict.prepare", predict.prepare),
      RCABS_REAL("predict.prepare_shift", predict.prepare_shift),
      RCABS_INT("predict.record_every", predict.record_every),

      RCABS_REAL("interpolate.prepare_s", interpolation.prepare_s),
      RCABS_REAL("interpolate.autonomous_s", interpolation.autonomous_s),
      RCABS_REAL("interpolate.settle_s", interpolation.settle_s),
      RCABS_INT("interpolate.record_every", interpolation.record_every),
      {"interpolate.test_shifts", [](RunConfig& c, const std::string& v) { c.test_shifts = to_values(v); },
       [](const RunConfig& c) { return show(c.test_shifts); }},

      RCABS_REAL("mechanism.prepare_s", mechanism.prepare_s),
      RCABS_REAL("mechanism.burn_in_s", mechanism.burn_in_s),
      RCABS_REAL("mechanism.window_s", mechanism.window_s),
      RCABS_REAL("mechanism.fd_dc", mechanism.fd_dc),
      RCABS_REAL("mechanism.feedback_s", mechanism.feedback_s),
      RCABS_REAL("mechanism.feedback_settle_s", mechanism.feedback_settle_s),
      RCABS_REAL("mechanism.shift", mechanism_shift),

      {"project.shifts", [](RunConfig& c, const std::string& v) { c.project_shifts = to_values(v); },
       [](const RunConfig& c) { return show(c.project_shifts); }},
      RCABS_REAL("project.duration_s", project_duration_s),
      RCABS_INT("project.record_every", project_record_every),

      {"sweep.gamma", [](RunConfig& c, const std::string& v) { c.sweep_gamma = to_values(v); },
       [](const RunConfig& c) { return show(c.sweep_gamma); }},
      {"sweep.rho", [](RunConfig& c, const std::string& v) { c.sweep_rho = to_values(v); },
       [](const RunConfig& c) { return show(c.sweep_rho); }},
      RCABS_INT("sweep.seeds", sweep_seeds),
      RCABS_INT("sweep.workers", sweep_workers),
      RCABS_REAL("sweep.zero_tol", rule.zero_tol),
      RCABS_REAL("sweep.neg_threshold", rule.neg_threshold),
      RCABS_REAL("sweep.pos_threshold", rule.pos_threshold),

      {"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); },
       [](const RunConfig& c) { return c.output_dir; }},
      RCABS_BOOL("run.desk_scale", desk_scale),
  };
  return entries;
}

#undef RCABS_REAL
#undef RCABS_INT
#undef RCABS_BOOL

const Entry& lookup(const std::string& key) {
  for (const auto& e : table()) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply(RunConfig& cfg, const Setting& s) {
  const Entry& e = lookup(s.first);
  try {
    e.set(cfg, s.second);
  } catch (const ConfigError& err) {
    throw ConfigError("config key '" + s.first + "': " + err.what());
  } catch (const std::exception&) {
    throw ConfigError("config key '" + s.first + "': invalid value '" + s.second + "'");
  }
}

}  // namespace

std::vector<std::uint64_t> RunConfig::seed_list() const {
  std::vector<std::uint64_t> seeds;
  for (Index s = 0; s < sweep_seeds; ++s) seeds.push_back(reservoir.seed + static_cast<std::uint64_t>(s));
  return seeds;
}

SweepGrid RunConfig::sweep_grid() const {
  SweepGrid grid = SweepGrid::defaults(attractor.kind);
  if (!sweep_gamma.empty()) grid.gamma_values = sweep_gamma;
  if (!sweep_rho.empty()) grid.rho_values = sweep_rho;
  grid.reservoir = reservoir;
  grid.training = training;
  grid.lyapunov = lyapunov;
  grid.lyapunov.k_exponents = exponents > 0 ? exponents : classification_exponents(attractor.kind);
  grid.seeds = seed_list();
  grid.prepare_s = lyapunov_prepare_s;
  grid.workers = sweep_workers;
  grid.rule = rule;
  grid.rule.memory = attractor.kind;
  return grid;
}

Setting parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + text + "'");
  const std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw ConfigError("empty key in '" + text + "'");
  return {key, trim(text.substr(eq + 1))};
}

std::vector<Setting> read_config_file(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    if (e.line() == 0) throw IoError("cannot read config " + path + ": " + e.message());
    throw ConfigError("config " + path + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  std::vector<Setting> settings;
  for (const auto& [name, node] : tree) {
    if (node.empty() && name.find('.') != std::string::npos) {
      settings.emplace_back(name, node.data());
      continue;
    }
    if (node.empty()) {
      if (!node.data().empty()) throw ConfigError("config key '" + name + "' needs a section");
      continue;
    }
    for (const auto& [key, leaf] : node) settings.emplace_back(name + "." + key, leaf.data());
  }
  return settings;
}

RunConfig resolve_config(const std::vector<Setting>& settings, bool desk_scale) {
  RunConfig cfg;
  for (const auto& s : settings) {
    lookup(s.first);
    if (s.first == "run.desk_scale") apply(cfg, s);
  }
  desk_scale = desk_scale || cfg.desk_scale;
  if (desk_scale) apply_desk_scale(cfg.reservoir, cfg.training, cfg.lyapunov);
  for (const auto& s : settings) apply(cfg, s);
  cfg.desk_scale = desk_scale;
  cfg.interpolation.seed = cfg.reservoir.seed;
  cfg.mechanism.seed = cfg.reservoir.seed;
  return cfg;
}

std::vector<Setting> describe(const RunConfig& cfg) {
  std::vector<Setting> out;
  for (const auto& e : table()) out.emplace_back(e.key, e.get(cfg));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : table()) keys.push_back(e.key);
  return keys;
}

}  // namespace rcabs
