#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "rcabs/config.hpp"
#include "rcabs/errors.hpp"

using namespace rcabs;

TEST_CASE("defaults") {
  const RunConfig cfg = resolve_config({});
  CHECK(cfg.reservoir.n_neurons == 1000);
  CHECK(cfg.reservoir.sparsity == 0.02);
  CHECK(cfg.reservoir.spectral_radius == 0.6);
  CHECK(cfg.reservoir.input_scale == 0.1);
  CHECK(cfg.reservoir.bias_scale == 10.0);
  CHECK(cfg.reservoir.gamma == 25.0);
  CHECK(cfg.training.dt == 0.001);
  CHECK(cfg.training.transient_s == 50.0);
  CHECK(cfg.training.learn_s == 100.0);
  CHECK(cfg.training.shifts == std::vector<double>{-2, -1, 0, 1, 2});
  CHECK(cfg.lyapunov.dt == 0.001);
  CHECK(cfg.lyapunov.reorthonormalize_every == 1);
  CHECK(cfg.predict.duration_s == 500.0);
  CHECK(cfg.sweep_seeds == 5);
  CHECK_FALSE(cfg.desk_scale);
}

TEST_CASE("settings override defaults in order") {
  const RunConfig cfg = resolve_config({{"reservoir.gamma", "10"},
                                        {"training.shifts", "-1,0,1"},
                                        {"reservoir.gamma", "12.5"},
                                        {"attractor.kind", "lorenz"},
                                        {"predict.prepare", "false"}});
  CHECK(cfg.reservoir.gamma == 12.5);
  CHECK(cfg.training.shifts == std::vector<double>{-1, 0, 1});
  CHECK(cfg.attractor.kind == AttractorKind::lorenz);
  CHECK_FALSE(cfg.predict.prepare);
}

TEST_CASE("unknown keys and bad values are named") {
  try {
    resolve_config({{"reservoir.gama", "10"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("reservoir.gama") != std::string::npos);
  }
  try {
    resolve_config({{"reservoir.gamma", "fast"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("reservoir.gamma") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_assignment("no_equals_sign"), ConfigError);
  CHECK(parse_assignment("reservoir.seed=3") == Setting{"reservoir.seed", "3"});
}

TEST_CASE("desk scale reduces sizes unless overridden") {
  const RunConfig desk = resolve_config({}, true);
  CHECK(desk.desk_scale);
  CHECK(desk.reservoir.n_neurons == 300);
  CHECK(desk.training.learn_s == 50.0);
  CHECK(desk.lyapunov.measure_s == 50.0);

  const RunConfig override_n = resolve_config({{"reservoir.n_neurons", "80"}, {"run.desk_scale", "true"}});
  CHECK(override_n.desk_scale);
  CHECK(override_n.reservoir.n_neurons == 80);
  CHECK(override_n.training.learn_s == 50.0);
}

TEST_CASE("describe round-trips") {
  const RunConfig cfg = resolve_config({{"reservoir.seed", "9"}, {"lyapunov.measure_s", "12.5"}});
  const auto described = describe(cfg);
  CHECK(described.size() == config_keys().size());
  const RunConfig again = resolve_config(described);
  CHECK(describe(again) == described);
  CHECK(again.reservoir.seed == 9);
}

TEST_CASE("config files") {
  testing::TempDir dir("config");
  const auto sectioned = dir.path() / "a.ini";
  {
    std::ofstream f(sectioned);
    f << "# comment\n[reservoir]\ngamma = 5\nseed = 4\n\n[training]\n; comment\nlearn_s = 7\n";
  }
  const auto s = read_config_file(sectioned.string());
  const RunConfig a = resolve_config(s);
  CHECK(a.reservoir.gamma == 5.0);
  CHECK(a.reservoir.seed == 4);
  CHECK(a.training.learn_s == 7.0);

  const auto flat = dir.path() / "b.ini";
  {
    std::ofstream f(flat);
    f << "reservoir.gamma = 6\nattractor.kind = lorenz\n";
  }
  const RunConfig b = resolve_config(read_config_file(flat.string()));
  CHECK(b.reservoir.gamma == 6.0);
  CHECK(b.attractor.kind == AttractorKind::lorenz);

  const auto dup = dir.path() / "c.ini";
  {
    std::ofstream f(dup);
    f << "[reservoir]\ngamma = 5\ngamma = 6\n";
  }
  CHECK_THROWS_AS(read_config_file(dup.string()), ConfigError);
  CHECK_THROWS(read_config_file((dir.path() / "missing.ini").string()));
}

TEST_CASE("seed list and sweep grid") {
  const RunConfig cfg = resolve_config({{"reservoir.seed", "10"}, {"sweep.seeds", "3"}, {"sweep.workers", "2"}});
  CHECK(cfg.seed_list() == std::vector<std::uint64_t>{10, 11, 12});
  const auto grid = cfg.sweep_grid();
  CHECK(grid.seeds == std::vector<std::uint64_t>{10, 11, 12});
  CHECK(grid.workers == 2);
  CHECK(grid.gamma_values.size() == 10);
}
