#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "beliefmdp/measures.hpp"
#include "beliefmdp/numeric.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace beliefmdp;

namespace {

const GroundMetric kLine{GroundMetric::Kind::euclidean, 1};

FiniteMeasure on_line(std::vector<double> xs, std::vector<double> ws) {
  std::vector<Point> support;
  for (double x : xs) support.push_back({x});
  return FiniteMeasure(kLine, std::move(support), std::move(ws));
}

FiniteMeasure random_measure(Rng& rng, std::size_t max_points) {
  const std::size_t n = 1 + rng.next_u64() % max_points;
  std::vector<double> xs(n);
  for (double& x : xs) x = 2.0 * rng.uniform() - 1.0;
  return on_line(xs, testutil::random_simplex(rng, n));
}

}  // namespace

TEST_CASE("FiniteMeasure invariants") {
  CHECK_THROWS_AS(on_line({0.0}, {0.5}), DomainError);          // mass != 1
  CHECK_THROWS_AS(on_line({0.0, 1.0}, {1.5, -0.5}), DomainError);  // negative
  // points closer than 1e-12 merge, weights added
  const FiniteMeasure merged = on_line({0.0, 1e-14}, {0.4, 0.6});
  CHECK(merged.size() == 1);
  CHECK(merged.weights()[0] == doctest::Approx(1.0));
  // zero-weight points are dropped
  CHECK(on_line({0.0, 1.0}, {1.0, 0.0}).size() == 1);
}

TEST_CASE("integrate") {
  const FiniteMeasure two = on_line({0.0, 1.0}, {0.3, 0.7});
  CHECK(integrate([](const Point&) { return 1.0; }, two) == doctest::Approx(1.0));
  const FiniteMeasure dirac = FiniteMeasure::dirac(kLine, {3.0});
  CHECK(integrate([](const Point& p) { return p[0]; }, dirac) == doctest::Approx(3.0));
  CHECK(integrate([](const Point& p) { return p[0]; }, two) == doctest::Approx(0.7));
  CHECK_THROWS_AS(
      integrate([](const Point& p) { return 1.0 / p[0]; }, two),  // inf at x = 0
      EvaluationError);
}

TEST_CASE("tv_distance worked values") {
  const FiniteMeasure a = on_line({0.0, 1.0}, {0.3, 0.7});
  CHECK(tv_distance(a, a) == 0.0);
  const FiniteMeasure b = on_line({0.0, 1.0}, {0.5, 0.5});
  CHECK(tv_distance(a, b) == doctest::Approx(0.4).epsilon(1e-12));
  // [0,2] normalization: disjoint Diracs are at distance 2, not 1
  CHECK(tv_distance(FiniteMeasure::dirac(kLine, {0.0}), FiniteMeasure::dirac(kLine, {1.0})) ==
        doctest::Approx(2.0));
}

TEST_CASE("lp_distance worked values") {
  const FiniteMeasure a = on_line({0.0, 1.0}, {0.3, 0.7});
  CHECK(lp_distance(a, a) == 0.0);
  // Diracs at ground distance d: rho_LP = min(d, 1)
  for (double d : {0.25, 0.5, 2.0}) {
    const double got =
        lp_distance(FiniteMeasure::dirac(kLine, {0.0}), FiniteMeasure::dirac(kLine, {d}));
    CHECK(got == doctest::Approx(std::min(d, 1.0)).epsilon(1e-8));
  }
  // half the mass must travel distance 1: rho_LP = 0.5
  const double got = lp_distance(on_line({0.0, 1.0}, {0.5, 0.5}),
                                 FiniteMeasure::dirac(kLine, {0.0}));
  CHECK(got == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("lp_distance matches exhaustive eps-set verification") {
  Rng rng(7001);
  for (int trial = 0; trial < 40; ++trial) {
    const FiniteMeasure mu = random_measure(rng, 5);
    const FiniteMeasure nu = random_measure(rng, 5);
    const double fast = lp_distance(mu, nu);
    const double slow = oracle::lp_by_sets(mu, nu);
    CAPTURE(trial);
    CHECK(std::fabs(fast - slow) <= 1e-6);
  }
}

TEST_CASE("metric axioms on random triples") {
  Rng rng(7002);
  for (int trial = 0; trial < 30; ++trial) {
    const FiniteMeasure a = random_measure(rng, 4);
    const FiniteMeasure b = random_measure(rng, 4);
    const FiniteMeasure c = random_measure(rng, 4);
    for (auto metric : {+[](const FiniteMeasure& x, const FiniteMeasure& y) {
                          return tv_distance(x, y);
                        },
                        +[](const FiniteMeasure& x, const FiniteMeasure& y) {
                          return lp_distance(x, y);
                        }}) {
      const double ab = metric(a, b), ba = metric(b, a);
      const double ac = metric(a, c), cb = metric(c, b);
      CHECK(std::fabs(ab - ba) <= 1e-9);            // symmetry
      CHECK(metric(a, a) <= 1e-9);                  // identity
      CHECK(ab <= ac + cb + 1e-9);                  // triangle
    }
  }
}

TEST_CASE("lp_distance stays within [0,1] and under the coupling bound") {
  Rng rng(7003);
  for (int trial = 0; trial < 50; ++trial) {
    const FiniteMeasure mu = random_measure(rng, 6);
    const FiniteMeasure nu = random_measure(rng, 6);
    const double lp = lp_distance(mu, nu);
    CHECK(lp >= 0.0);
    CHECK(lp <= 1.0);
    // max ground distance between any pair of support points bounds any
    // feasible transport radius, hence the metric (when mass mismatch allows)
    double max_d = 0.0;
    for (const auto& p : mu.support())
      for (const auto& q : nu.support()) max_d = std::max(max_d, mu.metric()(p, q));
    CHECK(lp <= std::min(1.0, max_d) + 1e-8);
  }
}

TEST_CASE("TV convergence implies LP convergence on a fixed support") {
  for (int n = 1; n <= 12; ++n) {
    const double eps = std::ldexp(1.0, -n);  // 2^{-n}
    const FiniteMeasure mu = on_line({0.0, 1.0}, {0.5, 0.5});
    const FiniteMeasure mu_n = on_line({0.0, 1.0}, {0.5 + 0.4 * eps, 0.5 - 0.4 * eps});
    const double tv = tv_distance(mu_n, mu);
    const double lp = lp_distance(mu_n, mu);
    CHECK(tv == doctest::Approx(0.8 * eps).epsilon(1e-9));
    CHECK(lp <= 0.5 * tv + 1e-8);  // same-point transport: only the excess pays
  }
}

TEST_CASE("sup_set_discrepancy worked values") {
  const std::vector<double> mu{0.5, 0.5};
  CHECK(sup_set_discrepancy(mu, mu) == 0.0);
  const std::vector<double> a{0.6, 0.4};
  const std::vector<double> b{0.4, 0.5};  // diff (+0.2, -0.1)
  CHECK(sup_set_discrepancy(a, b) == doctest::Approx(0.2));
  CHECK_THROWS_AS(sup_set_discrepancy(std::vector<double>{1.0}, mu), DomainError);
}

TEST_CASE("sup_set_discrepancy equals exhaustive subset maximum") {
  Rng rng(7004);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 12;
    std::vector<double> mu(n), nu(n);
    for (std::size_t i = 0; i < n; ++i) {
      mu[i] = rng.uniform();
      nu[i] = rng.uniform();
    }
    CHECK(sup_set_discrepancy(mu, nu) == oracle::subset_sup(mu, nu));
  }
}

TEST_CASE("ground metric triangle inequality on random triples") {
  Rng rng(7005);
  for (auto kind : {GroundMetric::Kind::euclidean, GroundMetric::Kind::l1}) {
    const GroundMetric metric{kind, 3};
    for (int trial = 0; trial < 50; ++trial) {
      Point a(3), b(3), c(3);
      for (int i = 0; i < 3; ++i) {
        a[i] = rng.uniform();
        b[i] = rng.uniform();
        c[i] = rng.uniform();
      }
      CHECK(metric(a, b) == doctest::Approx(metric(b, a)));
      CHECK(metric(a, a) == 0.0);
      CHECK(metric(a, b) <= metric(a, c) + metric(c, b) + 1e-12);
    }
  }
}
