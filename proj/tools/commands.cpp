#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rcabs/abstraction.hpp"
#include "rcabs/config.hpp"
#include "rcabs/errors.hpp"
#include "rcabs/manifest.hpp"
#include "rcabs/model_io.hpp"
#include "rcabs/pipeline.hpp"
#include "rcabs/sweep.hpp"

namespace rcabs::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool desk_scale = false;

  std::string system;
  std::string model;
  std::optional<double> duration;
  std::optional<double> shift;
  std::optional<double> prepare;
  bool no_prepare = false;
  std::string shifts;
  std::string file;
  bool dump_fit = false;
  std::optional<long> exponents;

  std::string memory;
  std::string gamma;
  std::string rho;
  std::optional<long> seeds;
  std::optional<long> workers;
  std::string param;
  std::string values;
};

struct Context {
  std::string command;
  RunConfig cfg;
  fs::path out;
  RunManifest manifest;
  std::ostream& stdout_;
};

std::vector<double> to_json_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

void emit(Context& ctx, const std::string& name, const std::string& contents) {
  write_file_atomic(ctx.out / name, contents);
  ctx.manifest.add_output(name);
}

std::string csv_header(const std::string& first, const std::string& prefix, Index k) {
  std::string h = first;
  for (Index i = 1; i <= k; ++i) h += "," + prefix + std::to_string(i);
  return h + "\n";
}

Model load(const Context& ctx, const Options& opt) {
  const fs::path path = opt.model.empty() ? ctx.out / "model.rcm" : fs::path(opt.model);
  Model model = load_model(path.string());
  if (!model.readout) throw ContractViolation("model " + path.string() + " has no trained readout");
  return model;
}

Index steps_for(double seconds, double dt) {
  if (!(seconds >= 0.0)) throw ContractViolation("durations must be nonnegative");
  return static_cast<Index>(std::llround(seconds / dt));
}

int cmd_generate(Context& ctx, const Options& opt) {
  const RunConfig& cfg = ctx.cfg;
  const AttractorSpec spec = cfg.attractor;
  cfg.training.validate(spec.dimension());
  const double duration = opt.duration.value_or(cfg.training.learn_s);
  const Index skip = cfg.training.transient_steps();
  const Index n = steps_for(duration, cfg.training.dt);
  Trajectory traj = [&] {
    StageTimer t(ctx.manifest, "integrate");
    return integrate(spec, cfg.training.attractor_start(spec), cfg.training.dt, skip + n);
  }();
  traj = shift(traj.slice(skip, skip + n + 1), ShiftSpec{cfg.training.direction(spec.dimension()), opt.shift.value_or(0.0)});
  std::ostringstream csv;
  write_csv(csv, Trajectory(traj.states(), traj.dt(), 0.0));
  const std::string name = opt.file.empty() ? "attractor.csv" : opt.file;
  emit(ctx, name, csv.str());
  ctx.stdout_ << "wrote " << (ctx.out / name).string() << "\n";
  return kExitOk;
}

int cmd_train(Context& ctx, const Options& opt) {
  const RunConfig& cfg = ctx.cfg;
  ctx.manifest.add_seed(cfg.reservoir.seed);
  TrainedSystem sys = [&] {
    StageTimer t(ctx.manifest, "train");
    return train_system(cfg.attractor, cfg.reservoir, cfg.training);
  }();
  const std::string model_name = opt.file.empty() ? "model.rcm" : opt.file;
  {
    std::ostringstream bytes;
    write_model(Model{sys.attractor, sys.training, sys.reservoir, sys.readout}, bytes);
    emit(ctx, model_name, bytes.str());
  }

  json report;
  report["attractor"] = to_string(sys.attractor.kind);
  report["neurons"] = sys.reservoir.neurons();
  report["inputs"] = sys.reservoir.inputs();
  report["ridge_beta"] = cfg.training.ridge_beta;
  report["rcond"] = sys.rcond;
  report["condition_estimate"] = sys.rcond > 0.0 ? 1.0 / sys.rcond : std::numeric_limits<double>::infinity();
  report["rmse"] = to_json_vector(sys.fit.rmse);
  report["readout_norm"] = sys.readout.W.norm();
  json segments = json::array();
  for (std::size_t s = 0; s < cfg.training.shifts.size(); ++s) {
    segments.push_back({{"shift", cfg.training.shifts[s]}, {"rmse", to_json_vector(sys.fit.segment_rmse[s])}});
  }
  report["segments"] = segments;
  emit(ctx, "training_report.json", report.dump(2) + "\n");
  ctx.manifest.set_result("rmse", report["rmse"]);

  if (opt.dump_fit) {
    StageTimer t(ctx.manifest, "dump_fit");
    const Index k = sys.reservoir.inputs();
    std::ostringstream csv;
    csv << "shift,t";
    for (Index j = 1; j <= k; ++j) csv << ",x" << j;
    for (Index j = 1; j <= k; ++j) csv << ",wr" << j;
    csv << '\n';
    const Index every = 10;
    replay_learning_phase(sys.reservoir, sys.attractor, sys.training,
                          [&](std::size_t s, Index i, const Vec& x, const Vec& r) {
                            if (i % every != 0) return;
                            const Vec y = sys.readout.W * r;
                            csv << format_double(sys.training.shifts[s]) << ','
                                << format_double(static_cast<double>(i) * sys.training.dt);
                            for (Index j = 0; j < k; ++j) csv << ',' << format_double(x[j]);
                            for (Index j = 0; j < k; ++j) csv << ',' << format_double(y[j]);
                            csv << '\n';
                          });
    emit(ctx, "training_fit.csv", csv.str());
  }
  ctx.stdout_ << report.dump() << "\n";
  return kExitOk;
}

int cmd_predict(Context& ctx, const Options& opt) {
  const Model model = load(ctx, opt);
  const PredictOptions& p = ctx.cfg.predict;
  if (p.record_every < 1) throw ContractViolation("predict.record_every must be >= 1");
  const double dt = model.training.dt;
  const Index n = steps_for(opt.duration.value_or(p.duration_s), dt);
  const std::uint64_t seed = model.reservoir.params.seed;
  ctx.manifest.add_seed(seed);
  Vec r = [&] {
    StageTimer t(ctx.manifest, "prepare");
    const double prep = p.prepare ? p.prepare_s : 0.0;
    return prepare_state(model.reservoir, model.attractor, model.training, p.prepare_shift, prep, seed);
  }();

  const Index k = model.reservoir.inputs();
  std::ostringstream csv;
  csv << csv_header("t", "xhat", k);
  const std::string name = opt.file.empty() ? "prediction.csv" : opt.file;
  try {
    StageTimer t(ctx.manifest, "evolve");
    if (n > 0) {
      evolve_autonomous_streaming(model.reservoir, *model.readout, r, dt, n, [&](Index i, const Vec& state) {
        if (i == 0 || i % p.record_every != 0) return;
        const Vec y = model.readout->W * state;
        csv << format_double(static_cast<double>(i) * dt);
        for (Index j = 0; j < k; ++j) csv << ',' << format_double(y[j]);
        csv << '\n';
      });
    }
  } catch (const DivergenceError&) {
    emit(ctx, name, csv.str());
    throw;
  }
  emit(ctx, name, csv.str());
  ctx.stdout_ << "wrote " << (ctx.out / name).string() << "\n";
  return kExitOk;
}

int cmd_lyapunov(Context& ctx, const Options& opt) {
  const RunConfig& cfg = ctx.cfg;
  LyapunovConfig lyap = cfg.lyapunov;
  const std::string system = opt.system.empty() ? to_string(cfg.attractor.kind) : opt.system;
  LyapunovResult result;
  json info;
  if (system == "reservoir") {
    const Model model = load(ctx, opt);
    lyap.k_exponents = cfg.exponents > 0 ? cfg.exponents : classification_exponents(model.attractor.kind);
    const std::uint64_t seed = model.reservoir.params.seed;
    ctx.manifest.add_seed(seed);
    StageTimer t(ctx.manifest, "lyapunov");
    result = closed_loop_spectrum(model.reservoir, *model.readout, model.attractor, model.training, lyap,
                                  cfg.lyapunov_shift, cfg.lyapunov_prepare_s, seed);
    info["memory"] = to_string(model.attractor.kind);
    info["shift"] = cfg.lyapunov_shift;
    info["prepare_s"] = cfg.lyapunov_prepare_s;
  } else {
    const AttractorSpec spec{parse_attractor_kind(system)};
    lyap.k_exponents = cfg.exponents > 0 ? cfg.exponents : spec.dimension();
    const Vec x0 = cfg.training.initial_state.size() > 0 ? cfg.training.initial_state : spec.default_initial_state();
    AttractorOrbit orbit(spec, x0);
    StageTimer t(ctx.manifest, "lyapunov");
    result = lyapunov_spectrum(orbit, lyap);
  }

  json j;
  j["system"] = system;
  j["exponents"] = to_json_vector(result.exponents);
  j["sum"] = result.exponents.sum();
  j["stretch_exponents"] = to_json_vector(result.stretch_exponents);
  const Index samples = result.running_means.cols();
  const Index quarter = std::max<Index>(0, samples - 1 - samples / 4);
  j["tolerance"] = {
      {"estimator_gap", (result.exponents - result.stretch_exponents).cwiseAbs().maxCoeff()},
      {"last_quarter_drift", (result.running_means.col(samples - 1) - result.running_means.col(quarter)).cwiseAbs().maxCoeff()},
      {"dt", lyap.dt},
      {"reorthonormalize_every", lyap.reorthonormalize_every}};
  j["config"] = {{"exponents", lyap.k_exponents},
                 {"transient_s", lyap.transient_s},
                 {"measure_s", lyap.measure_s},
                 {"measure_start", result.measure_start},
                 {"measure_end", result.measure_end}};
  if (!info.is_null()) j["orbit"] = info;
  emit(ctx, "lyapunov.json", j.dump(2) + "\n");

  std::ostringstream csv;
  csv << csv_header("t", "lambda", lyap.k_exponents);
  const Index stride = std::max<Index>(1, samples / 10000);
  for (Index s = stride - 1; s < samples; s += stride) {
    csv << format_double(result.sample_times[s]);
    for (Index i = 0; i < lyap.k_exponents; ++i) csv << ',' << format_double(result.running_means(i, s));
    csv << '\n';
  }
  emit(ctx, "lyapunov_running.csv", csv.str());
  ctx.manifest.set_result("exponents", j["exponents"]);
  ctx.stdout_ << j["exponents"].dump() << "\n";
  return kExitOk;
}

int cmd_mechanism(Context& ctx, const Options& opt) {
  const Model model = load(ctx, opt);
  MechanismOptions mo = ctx.cfg.mechanism;
  mo.seed = model.reservoir.params.seed;
  ctx.manifest.add_seed(mo.seed);
  const MechanismReport rep = [&] {
    StageTimer t(ctx.manifest, "mechanism");
    return analyze_mechanism(model.reservoir, *model.readout, model.attractor, model.training, mo);
  }();
  json j;
  j["fd_relative_error"] = rep.fd_relative_error;
  j["differential_residual"] = rep.differential_residual;
  j["feedback_growth_rate"] = rep.feedback_growth_rate;
  j["random_growth_rate"] = rep.random_growth_rate;
  j["delta_r_norm"] = rep.delta_r.norm();
  j["options"] = {{"prepare_s", mo.prepare_s},   {"burn_in_s", mo.burn_in_s}, {"window_s", mo.window_s},
                  {"fd_dc", mo.fd_dc},           {"feedback_s", mo.feedback_s},
                  {"feedback_settle_s", mo.feedback_settle_s}};
  emit(ctx, "mechanism.json", j.dump(2) + "\n");
  std::ostringstream csv;
  csv << "index,delta_r\n";
  for (Index i = 0; i < rep.delta_r.size(); ++i) csv << i << ',' << format_double(rep.delta_r[i]) << '\n';
  emit(ctx, "delta_r.csv", csv.str());
  ctx.manifest.set_result("mechanism", j);
  ctx.stdout_ << j.dump() << "\n";
  return kExitOk;
}

int cmd_interpolate(Context& ctx, const Options& opt) {
  const Model model = load(ctx, opt);
  InterpolationOptions io = ctx.cfg.interpolation;
  io.seed = model.reservoir.params.seed;
  ctx.manifest.add_seed(io.seed);
  const std::vector<DriftRow> rows = [&] {
    StageTimer t(ctx.manifest, "interpolate");
    return interpolation_test(model.reservoir, *model.readout, model.attractor, model.training, ctx.cfg.test_shifts, io);
  }();
  std::ostringstream csv;
  csv << "c,c_hat,residual,bounded\n";
  json errors = json::array();
  for (const auto& row : rows) {
    csv << format_double(row.c) << ',' << format_double(row.c_hat) << ',' << format_double(row.residual) << ','
        << (row.bounded ? "true" : "false") << '\n';
    if (!row.error.empty()) errors.push_back({{"c", row.c}, {"error", row.error}});
  }
  emit(ctx, "interpolation.csv", csv.str());
  ctx.manifest.set_result("row_errors", errors);
  ctx.stdout_ << "wrote " << (ctx.out / "interpolation.csv").string() << "\n";
  return kExitOk;
}

int cmd_project(Context& ctx, const Options& opt) {
  const Model model = load(ctx, opt);
  const RunConfig& cfg = ctx.cfg;
  if (cfg.project_record_every < 1) throw ContractViolation("project.record_every must be >= 1");
  const std::uint64_t seed = model.reservoir.params.seed;
  ctx.manifest.add_seed(seed);
  MechanismOptions mo = cfg.mechanism;
  mo.seed = seed;
  const Vec delta = [&] {
    StageTimer t(ctx.manifest, "delta_r");
    return analyze_mechanism(model.reservoir, *model.readout, model.attractor, model.training, mo).delta_r;
  }();
  std::vector<Trajectory> trajs;
  {
    StageTimer t(ctx.manifest, "trajectories");
    const Index n = steps_for(cfg.project_duration_s, model.training.dt);
    for (double c : cfg.project_shifts) {
      const Vec r0 = prepare_state(model.reservoir, model.attractor, model.training, c, cfg.interpolation.prepare_s, seed);
      trajs.push_back(
          evolve_autonomous(model.reservoir, *model.readout, r0, model.training.dt, n, cfg.project_record_every).states);
    }
  }
  const Fig2cProjection proj = project_fig2c(trajs, delta);
  std::ostringstream csv;
  csv << "traj_id,t,u,pc1,pc2\n";
  for (std::size_t id = 0; id < trajs.size(); ++id) {
    const Mat& c = proj.coordinates[id];
    for (Index i = 0; i < c.cols(); ++i) {
      csv << id << ',' << format_double(trajs[id].time(i)) << ',' << format_double(c(0, i)) << ','
          << format_double(c(1, i)) << ',' << format_double(c(2, i)) << '\n';
    }
  }
  emit(ctx, "projection.csv", csv.str());
  ctx.manifest.set_result("shifts", cfg.project_shifts);
  ctx.stdout_ << "wrote " << (ctx.out / "projection.csv").string() << "\n";
  return kExitOk;
}

int cmd_sweep(Context& ctx, const Options& opt) {
  const SweepGrid grid = ctx.cfg.sweep_grid();
  for (auto s : grid.seeds) ctx.manifest.add_seed(s);
  SweepResult result;
  {
    StageTimer t(ctx.manifest, "sweep");
    if (opt.param.empty()) {
      result = run_sweep(grid);
    } else {
      if (opt.values.empty()) throw ConfigError("--param needs --values");
      std::vector<double> values;
      if (opt.values.find(':') != std::string::npos) {
        values = parse_range(opt.values);
      } else {
        std::stringstream ss(opt.values);
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(parse_range(item).front());
      }
      result = sweep_scalar_param(parse_scalar_param(opt.param), values, grid);
    }
  }
  std::ostringstream records;
  write_records_csv(result, records);
  emit(ctx, "records.csv", records.str());
  if (result.param.empty()) {
    for (Index i = 1; i <= grid.lyapunov.k_exponents; ++i) {
      std::ostringstream matrix, longf;
      export_heatmap(result, i, matrix, longf);
      emit(ctx, "lambda" + std::to_string(i) + "_matrix.csv", matrix.str());
      emit(ctx, "lambda" + std::to_string(i) + "_long.csv", longf.str());
    }
  }
  long successes = 0;
  json cells = json::array();
  for (const auto& rec : result.records) {
    successes += rec.success ? 1 : 0;
    cells.push_back({{"gamma", rec.gamma}, {"rho", rec.rho}, {"seed", rec.seed}, {"success", rec.success},
                     {"reason", rec.failure_reason}});
  }
  ctx.manifest.set_result("cells", result.records.size());
  ctx.manifest.set_result("successes", successes);
  ctx.manifest.set_result("classification", cells);
  double cell_seconds = 0.0;
  for (const auto& rec : result.records) cell_seconds += rec.wall_time_s;
  ctx.manifest.add_stage("cells_total", cell_seconds);
  ctx.stdout_ << "sweep: " << successes << "/" << result.records.size() << " cells classified as abstraction\n";
  return kExitOk;
}

struct Failure {
  const char* kind;
  int code;
};

Failure classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return {"config", kExitConfig};
  if (dynamic_cast<const ContractViolation*>(&e)) return {"contract", kExitConfig};
  if (dynamic_cast<const IoError*>(&e)) return {"io", kExitIo};
  if (dynamic_cast<const DivergenceError*>(&e)) return {"divergence", kExitNumerical};
  if (dynamic_cast<const RankDeficiencyError*>(&e)) return {"rank_deficiency", kExitNumerical};
  if (dynamic_cast<const NumericalError*>(&e)) return {"numerical", kExitNumerical};
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return {"io", kExitIo};
  return {"internal", kExitNumerical};
}

void report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Reservoir computer attractor memories and abstraction analysis", "rcabs"};
  app.set_version_flag("--version", std::string("rcabs ") + RCABS_VERSION + " (model format " +
                                        std::to_string(RCABS_FORMAT_VERSION) + ")");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", opt.config_file, "Configuration file (section.key = value)");
  app.add_option("--set", opt.sets, "Override a config key: section.key=value (repeatable)");
  app.add_option("--seed", opt.seed, "Base seed");
  app.add_option("--out", opt.out, std::string("Output directory (default: $") + kOutDirEnv + " or .)");
  app.add_flag("--desk-scale", opt.desk_scale, "Reduced sizes: N=300, 50 s learning and measurement");

  auto* generate = app.add_subcommand("generate", "Integrate an attractor and write t,x1..xk");
  generate->add_option("--system", opt.system, "limit-cycle or lorenz");
  generate->add_option("--duration", opt.duration, "Seconds after the transient");
  generate->add_option("--shift", opt.shift, "Translation c along the shift direction");
  generate->add_option("--file", opt.file, "Output file name");

  auto* train = app.add_subcommand("train", "Train a readout and save the model");
  train->add_option("--system", opt.system, "limit-cycle or lorenz");
  train->add_option("--shifts", opt.shifts, "Training shifts: list or lo:hi:step");
  train->add_option("--file", opt.file, "Model file name (default model.rcm)");
  train->add_flag("--dump-fit", opt.dump_fit, "Also write W r(t) against x(t) for the learning phase");

  auto* predict = app.add_subcommand("predict", "Evolve a trained model autonomously");
  predict->add_option("--model", opt.model, "Model file (default <out>/model.rcm)");
  predict->add_option("--duration", opt.duration, "Seconds of autonomous evolution");
  predict->add_option("--prepare", opt.prepare, "Prepare on the memory shifted by c");
  predict->add_flag("--no-prepare", opt.no_prepare, "Start from a random state");
  predict->add_option("--file", opt.file, "Output file name");

  auto* lyapunov = app.add_subcommand("lyapunov", "Leading Lyapunov exponents");
  lyapunov->add_option("--system", opt.system, "lorenz, limit-cycle or reservoir")
      ->check(CLI::IsMember({"lorenz", "limit-cycle", "limit_cycle", "reservoir"}));
  lyapunov->add_option("--model", opt.model, "Model file for --system reservoir");
  lyapunov->add_option("--exponents", opt.exponents, "Number of exponents");
  lyapunov->add_option("--shift", opt.shift, "Memory shift the orbit is prepared on");

  auto* mechanism = app.add_subcommand("mechanism", "Linearized-response diagnostics");
  mechanism->add_option("--model", opt.model, "Model file");

  auto* interpolate = app.add_subcommand("interpolate", "Retained shift at untrained translations");
  interpolate->add_option("--model", opt.model, "Model file");
  interpolate->add_option("--shifts", opt.shifts, "Test shifts: list or lo:hi:step");

  auto* project = app.add_subcommand("project", "Project autonomous trajectories onto the shift axis and PCs");
  project->add_option("--model", opt.model, "Model file");
  project->add_option("--shifts", opt.shifts, "Shifts to prepare on: list or lo:hi:step");

  auto* sweep = app.add_subcommand("sweep", "Gamma x rho (or scalar) parameter sweep");
  sweep->add_option("--memory", opt.memory, "limit-cycle or lorenz");
  sweep->add_option("--gamma", opt.gamma, "lo:hi:step or list");
  sweep->add_option("--rho", opt.rho, "lo:hi:step or list");
  sweep->add_option("--seeds", opt.seeds, "Seeds per cell");
  sweep->add_option("--workers", opt.workers, "Worker threads");
  sweep->add_option("--param", opt.param, "Scalar sweep instead: input_scale or bias_scale")
      ->check(CLI::IsMember({"input_scale", "bias_scale"}));
  sweep->add_option("--values", opt.values, "Values for --param: list or lo:hi:step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what(), kExitConfig);
    return kExitConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  std::optional<Context> ctx;
  try {
    std::vector<Setting> settings;
    if (!opt.config_file.empty()) settings = read_config_file(opt.config_file);
    for (const auto& s : opt.sets) settings.push_back(parse_assignment(s));
    const std::string kind_flag = command == "sweep" ? opt.memory : opt.system;
    if (!kind_flag.empty() && kind_flag != "reservoir") settings.emplace_back("attractor.kind", kind_flag);
    if (opt.seed) settings.emplace_back("reservoir.seed", std::to_string(*opt.seed));
    if (!opt.shifts.empty()) {
      const std::string key = command == "train"         ? "training.shifts"
                              : command == "interpolate" ? "interpolate.test_shifts"
                                                         : "project.shifts";
      settings.emplace_back(key, opt.shifts);
    }
    if (opt.exponents) settings.emplace_back("lyapunov.exponents", std::to_string(*opt.exponents));
    if (command == "lyapunov" && opt.shift) settings.emplace_back("lyapunov.shift", format_double(*opt.shift));
    if (opt.prepare) {
      settings.emplace_back("predict.prepare", "true");
      settings.emplace_back("predict.prepare_shift", format_double(*opt.prepare));
    }
    if (opt.no_prepare) settings.emplace_back("predict.prepare", "false");
    if (!opt.gamma.empty()) settings.emplace_back("sweep.gamma", opt.gamma);
    if (!opt.rho.empty()) settings.emplace_back("sweep.rho", opt.rho);
    if (opt.seeds) settings.emplace_back("sweep.seeds", std::to_string(*opt.seeds));
    if (opt.workers) settings.emplace_back("sweep.workers", std::to_string(*opt.workers));

    RunConfig cfg = resolve_config(settings, opt.desk_scale);
    fs::path out_dir = opt.out;
    if (out_dir.empty()) out_dir = cfg.output_dir;
    if (out_dir.empty()) {
      const char* env = std::getenv(kOutDirEnv);
      out_dir = env && *env ? env : ".";
    }
    cfg.output_dir = out_dir.string();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    ctx.emplace(Context{command, cfg, out_dir, RunManifest(command, cfg, out_dir), out});
    int code = kExitOk;
    if (command == "generate") code = cmd_generate(*ctx, opt);
    if (command == "train") code = cmd_train(*ctx, opt);
    if (command == "predict") code = cmd_predict(*ctx, opt);
    if (command == "lyapunov") code = cmd_lyapunov(*ctx, opt);
    if (command == "mechanism") code = cmd_mechanism(*ctx, opt);
    if (command == "interpolate") code = cmd_interpolate(*ctx, opt);
    if (command == "project") code = cmd_project(*ctx, opt);
    if (command == "sweep") code = cmd_sweep(*ctx, opt);
    ctx->manifest.write();
    return code;
  } catch (const std::exception& e) {
    const Failure f = classify(e);
    report_error(err, f.kind, e.what(), f.code);
    if (ctx) {
      try {
        ctx->manifest.set_error(f.kind, e.what(), f.code);
        ctx->manifest.write();
      } catch (const std::exception& again) {
        report_error(err, "io", std::string("manifest not written: ") + again.what(), kExitIo);
      }
    }
    return f.code;
  }
}

}  // namespace rcabs::cli
