#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "rcabs/abstraction.hpp"
#include "rcabs/errors.hpp"
#include "rcabs/pipeline.hpp"
#include "rcabs/rng.hpp"

using namespace rcabs;

namespace {

const AttractorSpec kCycle{AttractorKind::limit_cycle};

const Reservoir& small_reservoir() {
  static const Reservoir res = [] {
    ReservoirParams p;
    p.n_neurons = 60;
    p.sparsity = 0.1;
    return build_reservoir(p, 2);
  }();
  return res;
}

// Open-loop base: driven states along the limit cycle.
struct Base {
  Trajectory inputs;
  Trajectory states;
};

Base open_base(const Reservoir& res, double seconds) {
  Vec x0(2);
  x0 << 1, 1;
  const auto n = static_cast<Index>(std::llround(seconds / 0.001));
  const Trajectory x = integrate(kCycle, x0, 0.001, 1000 + n);
  Vec r = uniform_state(res.neurons(), 1);
  drive_streaming(res, x.slice(0, 1001), r, {});
  Trajectory inputs = x.slice(1000, 1001 + n);
  Trajectory states = drive(res, inputs, r);
  return {std::move(inputs), std::move(states)};
}

Vec gain_at(const Reservoir& res, const Vec& r, const Vec& x) {
  const Vec u = (Mat(res.A) * r + res.B * x + res.d).array().tanh();
  return 1.0 - u.array().square();
}

MechanismOptions quick_options() {
  MechanismOptions o;
  o.prepare_s = 5.0;
  o.burn_in_s = 2.0;
  o.window_s = 1.0;
  o.feedback_s = 2.0;
  o.feedback_settle_s = 0.5;
  return o;
}

TrainingConfig quick_training() {
  TrainingConfig cfg;
  cfg.transient_s = 5.0;
  cfg.learn_s = 10.0;
  return cfg;
}

PerturbationTrajectory synthetic(const Mat& dr, double dt) {
  PerturbationTrajectory p;
  p.dr = dr;
  p.dt = dt;
  return p;
}

}  // namespace

TEST_CASE("linearized matrices") {
  const Reservoir& res = small_reservoir();
  const Index n = res.neurons();
  const Mat A = Mat(res.A);

  SUBCASE("zero preactivation") {
    // r chosen so that A r + B x + d = 0 with x = 0.
    const Vec r = A.fullPivLu().solve(-res.d);
    REQUIRE((A * r + res.d).norm() < 1e-8);
    const LinearizedSystem lin(res, Trajectory(Mat(r), 0.001), Trajectory(Mat::Zero(2, 1), 0.001));
    CHECK((lin.state_matrix(0) - res.gamma * (A - Mat::Identity(n, n))).norm() < 1e-6);
    CHECK((lin.input_matrix(0) - res.gamma * res.B).norm() < 1e-6);
  }
  SUBCASE("saturation") {
    Reservoir sat = res;
    sat.d = Vec::Constant(n, 1e3);
    const LinearizedSystem lin(sat, Trajectory(Mat::Zero(n, 1), 0.001), Trajectory(Mat::Zero(2, 1), 0.001));
    CHECK((lin.state_matrix(0) + sat.gamma * Mat::Identity(n, n)).norm() < 1e-12);
    CHECK(lin.input_matrix(0).norm() == 0.0);
  }
  SUBCASE("state matrix is the derivative of the open-loop field") {
    const Vec r = uniform_state(n, 3);
    const Vec x = testing::random_vector(2, 4);
    const LinearizedSystem lin(res, Trajectory(Mat(r), 0.001), Trajectory(Mat(x), 0.001));
    const Mat As = lin.state_matrix(0), Bs = lin.input_matrix(0);
    Vec fp, fm;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Vec v = testing::random_vector(n, 10 + s);
      const double h = 1e-6;
      open_loop_field(res, Vec(r + h * v), x, fp);
      open_loop_field(res, Vec(r - h * v), x, fm);
      CHECK(testing::rel_error(As * v, (fp - fm) / (2 * h)) < 1e-6);
      const Vec w = testing::random_vector(2, 20 + s);
      open_loop_field(res, r, Vec(x + h * w), fp);
      open_loop_field(res, r, Vec(x - h * w), fm);
      CHECK(testing::rel_error(Bs * w, (fp - fm) / (2 * h)) < 1e-6);
    }
  }
  SUBCASE("misaligned base trajectories") {
    CHECK_THROWS_AS(LinearizedSystem(res, Trajectory(Mat::Zero(n, 5), 0.001), Trajectory(Mat::Zero(2, 4), 0.001)),
                    ContractViolation);
    CHECK_THROWS_AS(LinearizedSystem(res, Trajectory(Mat::Zero(n, 5), 0.001), Trajectory(Mat::Zero(2, 5), 0.002)),
                    ContractViolation);
  }
}

TEST_CASE("input perturbation is linear") {
  const Reservoir& res = small_reservoir();
  const Index n = res.neurons();
  const Base base = open_base(res, 0.5);
  const LinearizedSystem lin(res, base.states, base.inputs);
  const Vec a = Vec::Ones(2) / std::sqrt(2.0);

  const auto zero = evolve_input_perturbation(lin, a, 0.0, Vec::Zero(n));
  CHECK(zero.dr.cwiseAbs().maxCoeff() == 0.0);

  const auto one = evolve_input_perturbation(lin, a, 0.3, Vec::Zero(n));
  const auto two = evolve_input_perturbation(lin, a, 0.6, Vec::Zero(n));
  CHECK((two.dr - 2.0 * one.dr).cwiseAbs().maxCoeff() <= 1e-14 * one.dr.cwiseAbs().maxCoeff());

  const Vec u = testing::random_vector(n, 5), v = testing::random_vector(n, 6);
  const auto pu = evolve_input_perturbation(lin, a, 0.0, u);
  const auto pv = evolve_input_perturbation(lin, a, 0.0, v);
  const auto puv = evolve_input_perturbation(lin, a, 0.0, Vec(u + v));
  CHECK((puv.dr - pu.dr - pv.dr).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear response matches the nonlinear finite difference") {
  const Reservoir& res = small_reservoir();
  const auto opts = quick_options();
  const auto cfg = quick_training();
  const double small = linearization_error(res, kCycle, cfg, 1e-4, opts);
  CHECK(small < 0.01);
  const double medium = linearization_error(res, kCycle, cfg, 1e-2, opts);
  const double large = linearization_error(res, kCycle, cfg, 1.0, opts);
  CHECK(small <= medium);
  CHECK(medium <= large);
}

TEST_CASE("feedback perturbation equals the input perturbation driven by W dr") {
  const Reservoir& res = small_reservoir();
  const Index n = res.neurons();
  const OutputMatrix W{testing::random_matrix(2, n, 7, 0.2)};
  const Vec r0 = uniform_state(n, 8);
  const auto run = evolve_autonomous(res, W, r0, 0.001, 200);
  const LinearizedSystem lin(res, run.states, W);
  const Vec dr0 = testing::random_vector(n, 9, 1e-2);
  const auto fb = evolve_feedback_perturbation(lin, W, dr0);

  // Independent dense RK4 with the input perturbation W dr substituted at each stage.
  const Mat A = Mat(res.A);
  const Trajectory& s = run.states;
  Vec dr = dr0;
  double worst = 0.0;
  for (Index i = 0; i + 1 < s.length(); ++i) {
    const Vec rm = s.midpoint(i);
    const Vec g0 = gain_at(res, s.state(i), W.W * s.state(i));
    const Vec gm = gain_at(res, rm, W.W * rm);
    const Vec g1 = gain_at(res, s.state(i + 1), W.W * s.state(i + 1));
    auto f = [&](const Vec& g, const Vec& v) -> Vec {
      const Vec dx = W.W * v;
      return res.gamma * (g.asDiagonal() * (A * v + res.B * dx) - v);
    };
    const double h = 0.001;
    const Vec k1 = f(g0, dr);
    const Vec k2 = f(gm, dr + 0.5 * h * k1);
    const Vec k3 = f(gm, dr + 0.5 * h * k2);
    const Vec k4 = f(g1, dr + h * k3);
    dr += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    worst = std::max(worst, (fb.dr.col(i + 1) - dr).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("differential map residual") {
  const Index n = 40;
  const Vec a = (Vec(2) << 0.6, 0.8).finished();
  const double dc = 0.5;
  const OutputMatrix W{testing::random_matrix(2, n, 11)};

  // Exact preimage: dr = W^+ a dc at every time.
  const Vec pre = W.W.completeOrthogonalDecomposition().solve(a * dc);
  const auto exact = synthetic(pre.replicate(1, 50), 0.001);
  CHECK(differential_map_residual(W, exact, a, dc) < 1e-10);

  for (std::uint64_t s = 0; s < 20; ++s) {
    const OutputMatrix Wr{testing::random_matrix(2, n, 100 + s)};
    CHECK(differential_map_residual(Wr, exact, a, dc) > 0.5);
  }
  CHECK_THROWS_AS(differential_map_residual(W, exact, a, 0.0), ContractViolation);
}

TEST_CASE("time-averaged perturbation") {
  const Vec v = testing::random_vector(5, 12);
  CHECK((delta_r(synthetic(v.replicate(1, 100), 0.01)) - v).norm() < 1e-14);

  // Whole periods of a sinusoid average to zero.
  const Index samples = 1001;
  Mat dr(2, samples);
  for (Index i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / 1000.0 * 3.0 * 2.0 * M_PI;
    dr(0, i) = std::sin(t);
    dr(1, i) = 2.0 + std::cos(t);
  }
  const Vec mean = delta_r(synthetic(dr, 0.001));
  CHECK(std::abs(mean[0]) < 1e-10);
  CHECK(std::abs(mean[1] - 2.0) < 1e-10);
}

TEST_CASE("log growth rate of an exponential") {
  Mat dr(3, 2001);
  const Vec dir = testing::random_vector(3, 13);
  for (Index i = 0; i < dr.cols(); ++i) dr.col(i) = dir * std::exp(0.3 * 0.001 * i);
  CHECK(log_growth_rate(synthetic(dr, 0.001), 0.5) == doctest::Approx(0.3).epsilon(1e-10));
  CHECK_THROWS_AS(log_growth_rate(synthetic(dr, 0.001), 5.0), ContractViolation);
}

TEST_CASE("projection frame") {
  const Index n = 20;
  const Vec delta = testing::random_vector(n, 14);
  const Vec u = delta.normalized();

  SUBCASE("trajectory inside the shift span has no principal coordinates") {
    Mat states(n, 50);
    for (Index i = 0; i < 50; ++i) states.col(i) = u * (0.1 * i - 2.0);
    const auto proj = project_fig2c({Trajectory(states, 0.01)}, delta);
    CHECK(proj.coordinates[0].bottomRows(2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((proj.coordinates[0].row(0).transpose() - states.transpose() * u).cwiseAbs().maxCoeff() < 1e-12);
  }

  Mat states(n, 400);
  std::mt19937_64 gen(15);
  std::normal_distribution<double> normal;
  const Mat mix = testing::random_matrix(n, 4, 16);
  for (Index i = 0; i < 400; ++i) {
    Vec z(4);
    for (Index j = 0; j < 4; ++j) z[j] = normal(gen) * (4.0 - j);
    states.col(i) = mix * z;
  }
  const auto proj = project_fig2c({Trajectory(states.leftCols(200), 0.01), Trajectory(states.rightCols(200), 0.01)},
                                  delta);
  const Mat& P = proj.principal_axes;

  SUBCASE("orthonormal axes orthogonal to the shift direction") {
    CHECK((P.transpose() * P - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((P.transpose() * u).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((proj.axis - u).norm() < 1e-15);
    CHECK(proj.coordinates.size() == 2);
  }
  SUBCASE("principal plane captures the most residual variance") {
    Mat Y = states.colwise() - states.rowwise().mean();
    Y -= u * (u.transpose() * Y);
    const double best = (P.transpose() * Y).squaredNorm();
    for (std::uint64_t s = 0; s < 100; ++s) {
      Mat Q = testing::random_matrix(n, 2, 200 + s);
      Q -= u * (u.transpose() * Q);
      Q = Q.householderQr().householderQ() * Mat::Identity(n, 2);
      CHECK((Q.transpose() * Y).squaredNorm() <= best * (1.0 + 1e-12));
    }
  }
  SUBCASE("subsampling barely moves the axes") {
    const auto coarse = project_fig2c({Trajectory(states, 0.01)}, delta, 200);
    for (Index j = 0; j < 2; ++j) CHECK(std::abs(coarse.principal_axes.col(j).dot(P.col(j))) > 0.99);
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(project_fig2c({}, delta), ContractViolation);
    CHECK_THROWS_AS(project_fig2c({Trajectory(states, 0.01)}, Vec::Zero(n)), ContractViolation);
    CHECK_THROWS_AS(project_fig2c({Trajectory(states.topRows(5), 0.01)}, delta), ContractViolation);
  }
}

TEST_CASE("mechanism report on a small trained system") {
  ReservoirParams p;
  p.n_neurons = 100;
  auto cfg = quick_training();
  const auto sys = train_system(kCycle, p, cfg);
  const auto report = analyze_mechanism(sys.reservoir, sys.readout, kCycle, cfg, quick_options());
  CHECK(report.delta_r.size() == 100);
  CHECK(std::isfinite(report.fd_relative_error));
  CHECK(report.fd_relative_error < 0.01);
  CHECK(std::isfinite(report.differential_residual));
  CHECK(std::isfinite(report.feedback_growth_rate));
  CHECK(std::isfinite(report.random_growth_rate));
}
