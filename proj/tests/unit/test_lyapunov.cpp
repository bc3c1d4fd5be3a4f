#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "rcabs/errors.hpp"
#include "rcabs/lyapunov.hpp"
#include "rcabs/rng.hpp"

using namespace rcabs;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

LyapunovResult lorenz_spectrum(Index reorth = 1) {
  AttractorOrbit orbit(AttractorSpec{AttractorKind::lorenz}, vec({1, 1, 1}));
  LyapunovConfig cfg;
  cfg.reorthonormalize_every = reorth;
  return lyapunov_spectrum(orbit, cfg);
}

const LyapunovResult& lorenz_default() {
  static const LyapunovResult r = lorenz_spectrum();
  return r;
}

}  // namespace

TEST_CASE("gram-schmidt") {
  SUBCASE("already orthonormal input is unchanged") {
    const Mat I = Mat::Identity(3, 3);
    CHECK((gram_schmidt(I) - I).norm() < 1e-15);
  }
  SUBCASE("two-vector example") {
    Mat v(2, 2);
    v << 1, 1, 0, 1;
    const Mat q = gram_schmidt(v);
    CHECK((q - Mat::Identity(2, 2)).norm() < 1e-15);
  }
  SUBCASE("orthonormal output for random input") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Mat q = gram_schmidt(testing::random_matrix(10, 5, seed));
      CHECK((q.transpose() * q - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("span is preserved") {
    const Mat v = testing::random_matrix(8, 3, 21);
    const Mat q = gram_schmidt(v);
    // Each input column lies in the span of the outputs up to its index.
    for (Index j = 0; j < 3; ++j) {
      const Mat Q = q.leftCols(j + 1);
      CHECK((v.col(j) - Q * (Q.transpose() * v.col(j))).norm() < 1e-12 * v.col(j).norm());
    }
  }
  SUBCASE("dependent vector is reported with its index") {
    Mat v(3, 3);
    v.col(0) = vec({1, 0, 0});
    v.col(1) = vec({0, 1, 0});
    v.col(2) = vec({2, -3, 0});
    bool thrown = false;
    try {
      gram_schmidt(v);
    } catch (const DegenerateBasisError& e) {
      thrown = true;
      CHECK(e.index() == 3);
    }
    CHECK(thrown);
  }
}

TEST_CASE("tangent step under a constant jacobian") {
  const Mat J = vec({-1, -2}).asDiagonal();
  LinearFlow flow(J, vec({1, 1}));
  Mat p = Mat::Identity(2, 2);
  step_perturbations(flow, p, 0.001);
  CHECK(p(0, 0) == doctest::Approx(std::exp(-0.001)).epsilon(1e-12));
  CHECK(p(1, 1) == doctest::Approx(std::exp(-0.002)).epsilon(1e-12));
  CHECK(std::abs(p(0, 1)) + std::abs(p(1, 0)) == 0.0);

  LinearFlow frozen(Mat::Zero(2, 2), vec({1, 1}));
  Mat q = testing::random_matrix(2, 2, 3);
  const Mat before = q;
  step_perturbations(frozen, q, 0.01);
  CHECK(q == before);
}

TEST_CASE("tangent step is linear in the perturbation") {
  AttractorOrbit a(AttractorSpec{AttractorKind::lorenz}, vec({1, 2, 3}));
  AttractorOrbit b(AttractorSpec{AttractorKind::lorenz}, vec({1, 2, 3}));
  Mat p = testing::random_matrix(3, 2, 4);
  Mat p2 = 2.0 * p;
  step_perturbations(a, p, 0.001);
  step_perturbations(b, p2, 0.001);
  CHECK((p2 - 2.0 * p).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(a.state() == b.state());
}

TEST_CASE("jacobian actions are linear") {
  ReservoirParams params;
  params.n_neurons = 30;
  params.sparsity = 0.2;
  const Reservoir res = build_reservoir(params, 2);
  const OutputMatrix W{testing::random_matrix(2, 30, 5, 0.3)};
  ClosedLoopOrbit closed(res, W, uniform_state(30, 6));
  AttractorOrbit lorenz(AttractorSpec{AttractorKind::lorenz}, vec({1, 1, 1}));
  for (JacobianOrbitProvider* provider : {static_cast<JacobianOrbitProvider*>(&closed),
                                          static_cast<JacobianOrbitProvider*>(&lorenz)}) {
    const Index n = provider->dimension();
    const Mat u = testing::random_matrix(n, 1, 7), v = testing::random_matrix(n, 1, 8);
    Mat Ju, Jv, Jc;
    provider->jacobian_action(provider->state(), u, Ju);
    provider->jacobian_action(provider->state(), v, Jv);
    provider->jacobian_action(provider->state(), Mat(1.7 * u + v), Jc);
    CHECK((Jc - (1.7 * Ju + Jv)).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + Jc.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("instantaneous exponents are rayleigh quotients") {
  LinearFlow flow(vec({-1, -2}).asDiagonal(), vec({1, 1}));
  const Vec e = instantaneous_exponents(flow, Mat::Identity(2, 2));
  CHECK((e - vec({-1, -2})).norm() < 1e-15);

  Mat skew(2, 2);
  skew << 0, 1, -1, 0;
  LinearFlow rotation(skew, vec({1, 0}));
  CHECK(instantaneous_exponents(rotation, Mat::Identity(2, 2)).norm() < 1e-15);

  CHECK_THROWS_AS(instantaneous_exponents(flow, 2.0 * Mat::Identity(2, 2)), ContractViolation);
}

TEST_CASE("constant linear flow") {
  LinearFlow flow(vec({-1, -2}).asDiagonal(), vec({1, 1}));
  LyapunovConfig cfg;
  cfg.k_exponents = 2;
  cfg.transient_s = 1.0;
  cfg.measure_s = 5.0;
  const auto r = lyapunov_spectrum(flow, cfg);
  CHECK((r.exponents - vec({-1, -2})).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.stretch_exponents - vec({-1, -2})).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lorenz spectrum") {
  const auto& r = lorenz_default();
  REQUIRE(r.exponents.size() == 3);
  CHECK(std::abs(r.exponents[0] - 0.9) <= 0.1);
  CHECK(std::abs(r.exponents[1]) <= 0.02);
  CHECK(std::abs(r.exponents[2] + 14.6) <= 0.5);
  CHECK(std::abs(r.exponents.sum() + 41.0 / 3.0) <= 0.05);
  CHECK((r.exponents - r.stretch_exponents).cwiseAbs().maxCoeff() <= 0.02);

  // Running means settle over the last fifth of the window.
  const Index n = r.running_means.cols();
  const Index start = n - n / 5;
  for (Index i = 0; i < 3; ++i) {
    const auto tail = r.running_means.row(i).segment(start, n - start).array();
    const double mean = tail.mean();
    const double sd = std::sqrt((tail - mean).square().mean());
    CHECK(sd < 0.05);
  }
  CHECK((r.running_means.col(n - 1) - r.exponents).norm() < 1e-12);
}

TEST_CASE("reorthonormalization interval does not change the result") {
  const auto& base = lorenz_default();
  for (Index every : {Index(5), Index(10)}) {
    const auto r = lorenz_spectrum(every);
    CHECK((r.exponents - base.exponents).cwiseAbs().maxCoeff() <= 0.02);
  }
}

TEST_CASE("limit cycle spectrum") {
  AttractorOrbit orbit(AttractorSpec{AttractorKind::limit_cycle}, vec({1, 1}));
  LyapunovConfig cfg;
  cfg.k_exponents = 2;
  const auto r = lyapunov_spectrum(orbit, cfg);
  CHECK(std::abs(r.exponents[0]) <= 0.02);
  CHECK(std::abs(r.exponents[1] + 40.0) <= 1.0);
}

TEST_CASE("invalid configuration") {
  AttractorOrbit orbit(AttractorSpec{AttractorKind::limit_cycle}, vec({1, 1}));
  LyapunovConfig cfg;
  cfg.k_exponents = 3;
  CHECK_THROWS_AS(lyapunov_spectrum(orbit, cfg), ContractViolation);
  cfg.k_exponents = 2;
  cfg.reorthonormalize_every = 0;
  CHECK_THROWS_AS(lyapunov_spectrum(orbit, cfg), ContractViolation);
  CHECK_THROWS_AS(AttractorOrbit(AttractorSpec{AttractorKind::lorenz}, vec({1, 1})), ContractViolation);
}
