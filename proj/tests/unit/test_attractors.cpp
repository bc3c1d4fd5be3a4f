#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "rcabs/attractors.hpp"
#include "rcabs/errors.hpp"

using namespace rcabs;

namespace {

const AttractorSpec kCycle{AttractorKind::limit_cycle};
const AttractorSpec kLorenz{AttractorKind::lorenz};

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Central differences of the vector field, column by column.
Mat fd_jacobian(const AttractorSpec& spec, const Vec& x, double h) {
  const Index k = x.size();
  Mat J(k, k);
  for (Index j = 0; j < k; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (derivative(spec, xp) - derivative(spec, xm)) / (2.0 * h);
  }
  return J;
}

double end_error(const AttractorSpec& spec, const Vec& x0, double T, double dt) {
  const auto n = static_cast<Index>(std::llround(T / dt));
  const auto coarse = integrate(spec, x0, dt, n);
  const auto fine = integrate(spec, x0, dt / 10.0, n * 10);
  return (coarse.state(n) - fine.state(n * 10)).norm();
}

}  // namespace

TEST_CASE("vector field values") {
  CHECK((derivative(kLorenz, vec({1, 1, 1})) - vec({0, 26, -5.0 / 3.0})).norm() < 1e-14);
  CHECK(derivative(kCycle, vec({0, 0})).norm() == 0.0);
  const Vec v = derivative(kCycle, vec({std::sqrt(2.0), 0}));
  CHECK(std::abs(v[0]) < 1e-13);
  CHECK(v[1] == doctest::Approx(10.0 * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("state of the wrong dimension is rejected") {
  CHECK_THROWS_AS(derivative(kLorenz, vec({1, 2})), ContractViolation);
  CHECK_THROWS_AS(analytic_jacobian(kCycle, vec({1, 2, 3})), ContractViolation);
  CHECK_THROWS_AS(integrate(kCycle, vec({1, 2, 3}), 0.001, 10), ContractViolation);
}

TEST_CASE("jacobian values") {
  Mat expected(3, 3);
  expected << -10, 10, 0, 28, -1, 0, 0, 0, -8.0 / 3.0;
  CHECK((analytic_jacobian(kLorenz, vec({0, 0, 0})) - expected).norm() < 1e-14);

  Mat cycle(2, 2);
  cycle << 20, -10, 10, 20;
  CHECK((analytic_jacobian(kCycle, vec({0, 0})) - cycle).norm() < 1e-14);

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x = vec({u(gen), u(gen), u(gen)});
    CHECK(analytic_jacobian(kLorenz, x).trace() == doctest::Approx(-41.0 / 3.0).epsilon(1e-13));
  }
}

TEST_CASE("analytic jacobian matches central differences") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (const auto& spec : {kCycle, kLorenz}) {
    for (int trial = 0; trial < 100; ++trial) {
      Vec x(spec.dimension());
      for (Index i = 0; i < x.size(); ++i) x[i] = u(gen);
      const Mat J = analytic_jacobian(spec, x);
      // The field is cubic at most, so a central difference is exact up to O(h^2) of the cubic term.
      const Mat fd = fd_jacobian(spec, x, 1e-4);
      CHECK(testing::rel_error(fd, J) < 1e-6);
    }
  }
}

TEST_CASE("one period of the limit cycle follows the closed form") {
  const double dt = 0.001;
  const double period = 2.0 * M_PI / 10.0;
  const auto n = static_cast<Index>(std::llround(period / dt));
  const auto traj = integrate(kCycle, vec({std::sqrt(2.0), 0}), dt, n);
  REQUIRE(traj.length() == n + 1);
  for (Index i = 0; i <= n; i += 50) {
    const double phase = 10.0 * traj.time(i);
    const Vec exact = std::sqrt(2.0) * vec({std::cos(phase), std::sin(phase)});
    CHECK((traj.state(i) - exact).norm() < 1e-6);
  }
}

TEST_CASE("off-cycle start follows the closed-form radius") {
  // d(r^2)/dt = 20 r^2 (2 - r^2) is logistic: r^2(t) = 2 / (1 + (2/r0^2 - 1) e^{-40 t}).
  const double r0 = 0.1;
  const double dt = 0.001;
  const auto traj = integrate(kCycle, vec({r0, 0}), dt, 10000);
  for (Index i : {Index(10), Index(50), Index(100), Index(200), Index(10000)}) {
    const double t = traj.time(i);
    const double r2 = 2.0 / (1.0 + (2.0 / (r0 * r0) - 1.0) * std::exp(-40.0 * t));
    CHECK(std::abs(traj.state(i).norm() - std::sqrt(r2)) < 1e-6);
  }
  CHECK(std::abs(traj.state(10000).norm() - std::sqrt(2.0)) < 1e-6);
}

TEST_CASE("limit cycle attracts every nonzero start") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> radius(0.1, 3.0), angle(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 20; ++trial) {
    const double r = radius(gen), a = angle(gen);
    const auto traj = integrate(kCycle, vec({r * std::cos(a), r * std::sin(a)}), 0.001, 5000);
    CHECK(std::abs(traj.state(5000).norm() - std::sqrt(2.0)) < 1e-8);
  }
}

TEST_CASE("lorenz step halving") {
  const Vec x0 = vec({1, 1, 1});
  const auto coarse = integrate(kLorenz, x0, 0.001, 1000);
  const auto fine = integrate(kLorenz, x0, 0.0001, 10000);
  CHECK((coarse.state(1000) - fine.state(10000)).norm() < 1e-5);
}

TEST_CASE("RK4 global error is fourth order") {
  for (const auto& [spec, x0, T] :
       {std::tuple{kCycle, vec({0.5, 0.3}), 1.0}, std::tuple{kLorenz, vec({1, 1, 1}), 0.5}}) {
    std::vector<double> log_dt, log_err;
    for (double dt : {0.02, 0.01, 0.005}) {
      log_dt.push_back(std::log(dt));
      log_err.push_back(std::log(end_error(spec, x0, T, dt)));
    }
    // Least-squares slope.
    const double mx = (log_dt[0] + log_dt[1] + log_dt[2]) / 3.0;
    const double my = (log_err[0] + log_err[1] + log_err[2]) / 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
      sxy += (log_dt[i] - mx) * (log_err[i] - my);
      sxx += (log_dt[i] - mx) * (log_dt[i] - mx);
    }
    const double slope = sxy / sxx;
    CHECK(slope > 3.5);
    CHECK(slope < 4.5);
  }
}

TEST_CASE("lorenz stays on its bounded attractor") {
  const auto traj = integrate(kLorenz, vec({1, 1, 1}), 0.001, 100000);
  CHECK(traj.states().allFinite());
  CHECK(traj.states().cwiseAbs().maxCoeff() < 100.0);
}

TEST_CASE("blow-up raises a divergence error") {
  bool thrown = false;
  try {
    integrate(kCycle, vec({100, 0}), 0.001, 1000);
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(e.step() > 0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
  CHECK(thrown);
}

TEST_CASE("shift translates every sample") {
  const Mat states = (Mat(2, 2) << 1, 2, 1, 2).finished();
  const Trajectory traj(states, 0.5);
  const auto moved = shift(traj, {vec({1, 0}), -2.0});
  CHECK((moved.states() - (Mat(2, 2) << -1, 0, 1, 2).finished()).norm() == 0.0);
  CHECK(moved.dt() == 0.5);

  const auto unchanged = shift(traj, {vec({1, 1}), 0.0});
  CHECK(unchanged.states() == traj.states());

  const Vec u = vec({0.3, -0.7});
  const auto twice = shift(shift(traj, {u, 0.4}), {u, 1.1});
  const auto once = shift(traj, {u, 1.5});
  CHECK((twice.states() - once.states()).norm() < 1e-14);

  CHECK_THROWS_AS(shift(traj, {vec({1, 0, 0}), 1.0}), ContractViolation);
}

TEST_CASE("shift does not commute with integration for the nonlinear memory") {
  const Vec u = vec({1, 1}) / std::sqrt(2.0);
  const Vec x0 = vec({1, 0.5});
  const auto integrated_then_shifted = shift(integrate(kCycle, x0, 0.001, 500), {u, 1.0});
  const auto shifted_then_integrated = integrate(kCycle, x0 + u, 0.001, 500);
  CHECK((integrated_then_shifted.state(500) - shifted_then_integrated.state(500)).norm() > 0.1);
}

TEST_CASE("csv export is lossless") {
  const auto traj = integrate(kLorenz, vec({1, 1, 1}), 0.001, 20);
  std::ostringstream out;
  write_csv(out, traj);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x1,x2,x3");
  Index row = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string cell;
    std::getline(fields, cell, ',');
    CHECK(std::stod(cell) == traj.time(row));
    for (Index j = 0; j < 3; ++j) {
      std::getline(fields, cell, ',');
      CHECK(std::stod(cell) == traj.state(row)[j]);
    }
    ++row;
  }
  CHECK(row == traj.length());
}

TEST_CASE("cubic midpoint is exact for cubic signals") {
  Mat s(1, 6);
  auto f = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t * t * t; };
  for (Index i = 0; i < 6; ++i) s(0, i) = f(0.1 * i);
  const Trajectory traj(s, 0.1);
  for (Index i = 1; i + 2 < 6; ++i) CHECK(traj.midpoint(i)[0] == doctest::Approx(f(0.1 * i + 0.05)).epsilon(1e-13));
  // End intervals are quadratic.
  Mat q(1, 3);
  auto g = [](double t) { return 2.0 + t - 3.0 * t * t; };
  for (Index i = 0; i < 3; ++i) q(0, i) = g(0.1 * i);
  const Trajectory quad(q, 0.1);
  CHECK(quad.midpoint(0)[0] == doctest::Approx(g(0.05)).epsilon(1e-13));
  CHECK(quad.midpoint(1)[0] == doctest::Approx(g(0.15)).epsilon(1e-13));
}

TEST_CASE("attractor names parse") {
  CHECK(parse_attractor_kind("lorenz") == AttractorKind::lorenz);
  CHECK(parse_attractor_kind("limit-cycle") == AttractorKind::limit_cycle);
  CHECK(parse_attractor_kind("limit_cycle") == AttractorKind::limit_cycle);
  CHECK_THROWS(parse_attractor_kind("rossler"));
}
