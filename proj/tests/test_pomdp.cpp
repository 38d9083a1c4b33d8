#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "beliefmdp/io.hpp"
#include "beliefmdp/pomdp.hpp"
#include "test_support.hpp"

using namespace beliefmdp;
using testutil::m1_fixture;

TEST_CASE("validate_model accepts the M1 fixture") {
  CHECK(validate_model(m1_fixture()).ok());
}

TEST_CASE("validate_model names the bad row") {
  FinitePOMDP m = m1_fixture();
  m.transition[1](0, 0) = 0.8;  // row now sums to 0.9
  const ValidationReport report = validate_model(m);
  REQUIRE(!report.ok());
  CHECK(report.violations[0].where == "P[a=1][0]");
}

TEST_CASE("validate_model flags unbounded-below cost") {
  FinitePOMDP m = m1_fixture();
  m.cost(1, 0) = -std::numeric_limits<double>::infinity();
  const ValidationReport report = validate_model(m);
  REQUIRE(!report.ok());
  bool found = false;
  for (const auto& v : report.violations) {
    found = found || v.message.find("unbounded below") != std::string::npos;
  }
  CHECK(found);
}

TEST_CASE("validate_model rejects states priced out of every action") {
  FinitePOMDP m = m1_fixture();
  m.cost(0, 0) = std::numeric_limits<double>::infinity();
  m.cost(0, 1) = std::numeric_limits<double>::infinity();
  CHECK(!validate_model(m).ok());
  // a single +inf entry stays legal
  FinitePOMDP ok = m1_fixture();
  ok.cost(0, 1) = std::numeric_limits<double>::infinity();
  CHECK(validate_model(ok).ok());
}

TEST_CASE("validate_model throws SchemaError on shape mismatch") {
  FinitePOMDP m = m1_fixture();
  m.transition[0] = Matrix(3, 2, 0.5);
  CHECK_THROWS_AS(validate_model(m), SchemaError);
}

TEST_CASE("validator completeness under fuzzed violations") {
  Rng rng(8101);
  for (int trial = 0; trial < 200; ++trial) {
    FinitePOMDP m = testutil::random_model(rng, 2 + rng.next_u64() % 3,
                                           2 + rng.next_u64() % 3, 1 + rng.next_u64() % 3,
                                           0.9, CostAssumption::P);
    REQUIRE(validate_model(m).ok());
    switch (rng.next_u64() % 6) {
      case 0: m.transition[0](0, 0) += 0.1; break;                      // row sum
      case 1: m.observation[0](0, 0) = -m.observation[0](0, 0) - 0.01; break;  // sign
      case 2: m.initial_observation(0, 0) += 1e-9; break;               // row sum (small)
      case 3: m.cost(0, 0) = -1.0; break;                               // negative under P
      case 4: m.cost(0, 0) = std::nan(""); break;                       // NaN cost
      case 5: m.alpha = 1.5; break;                                     // bad alpha
    }
    CHECK(!validate_model(m).ok());
  }
}

TEST_CASE("check_cost_assumptions") {
  SUBCASE("nonnegative costs, alpha < 1") {
    const CostCheck check = check_cost_assumptions(m1_fixture(0.95));
    CHECK(check.holds_p);
    CHECK(check.holds_d);
    CHECK(check.shift == 0.0);
    CHECK(check.kinf_diagnostic.find("trivially") != std::string::npos);
  }
  SUBCASE("min c = -3, alpha = 0.9 -> D holds, K = 3") {
    FinitePOMDP m = m1_fixture(0.9);
    m.assumption = CostAssumption::D;
    m.cost(0, 0) = -3.0;
    const CostCheck check = check_cost_assumptions(m);
    CHECK(check.holds_d);
    CHECK(!check.holds_p);
    CHECK(check.shift == doctest::Approx(3.0));
  }
  SUBCASE("min c = -3, alpha = 1 -> neither holds") {
    FinitePOMDP m = m1_fixture(1.0);
    m.cost(0, 0) = -3.0;
    const CostCheck check = check_cost_assumptions(m);
    CHECK(!check.holds_d);
    CHECK(!check.holds_p);
  }
}

TEST_CASE("kinf sequence diagnostic samples the sublevel set") {
  Rng rng(8102);
  const auto cost = [](std::size_t, double a) { return a; };
  const std::string report = kinf_sequence_diagnostic(cost, 2, 0.5, rng);
  CHECK(report.find("accumulate") != std::string::npos);
  Rng rng2(8103);
  const std::string empty = kinf_sequence_diagnostic(cost, 2, -1.0, rng2);
  CHECK(empty.find("inconclusive") != std::string::npos);
}

TEST_CASE("kernel_at endpoints and midpoint") {
  Rng rng(8104);
  ParametricKernelFamily family{testutil::random_stochastic(rng, 3, 3),
                                testutil::random_stochastic(rng, 3, 3), LinkKind::linear};
  CHECK(kernel_at(family, 0.0) == family.k0);
  CHECK(kernel_at(family, 1.0) == family.k1);
  const Matrix mid = kernel_at(family, 0.5);
  for (std::size_t i = 0; i < mid.data.size(); ++i) {
    CHECK(mid.data[i] ==
          doctest::Approx(0.5 * (family.k0.data[i] + family.k1.data[i])).epsilon(1e-12));
  }
  CHECK_THROWS_AS(kernel_at(family, 1.5), DomainError);
  CHECK_THROWS_AS(kernel_at(family, -0.1), DomainError);
}

TEST_CASE("link shapes") {
  ParametricKernelFamily family{Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0}), LinkKind::smoothstep};
  CHECK(family.link_value(0.0) == 0.0);
  CHECK(family.link_value(1.0) == 1.0);
  CHECK(family.link_value(0.5) == doctest::Approx(0.5));
  family.link = LinkKind::step;
  CHECK(family.link_value(0.49) == 0.0);
  CHECK(family.link_value(0.5) == 1.0);
}

TEST_CASE("linear link TV modulus is exactly proportional") {
  Rng rng(8105);
  for (int trial = 0; trial < 20; ++trial) {
    ParametricKernelFamily family{testutil::random_stochastic(rng, 3, 4),
                                  testutil::random_stochastic(rng, 3, 4), LinkKind::linear};
    const double a = rng.uniform();
    const double b = rng.uniform();
    for (std::size_t row = 0; row < 3; ++row) {
      const double step = row_tv_distance(family.at(a).row(row), family.at(b).row(row));
      const double full = row_tv_distance(family.k0.row(row), family.k1.row(row));
      CHECK(std::fabs(step - std::fabs(a - b) * full) <= 1e-12);
    }
  }
}

TEST_CASE("model JSON round trip is bit-exact on weights") {
  Rng rng(8106);
  FinitePOMDP m = testutil::random_model(rng, 3, 2, 2, 0.97, CostAssumption::P);
  m.cost(1, 1) = std::numeric_limits<double>::infinity();
  m.action_names = {"hold", "move"};
  const FinitePOMDP back = model_from_json(model_to_json(m));
  CHECK(back.n_states == m.n_states);
  CHECK(back.action_names == m.action_names);
  for (std::size_t a = 0; a < m.n_actions; ++a) {
    CHECK(back.transition[a].data == m.transition[a].data);
    CHECK(back.observation[a].data == m.observation[a].data);
  }
  CHECK(back.initial_observation.data == m.initial_observation.data);
  CHECK(back.cost.data == m.cost.data);
  CHECK(back.alpha == m.alpha);
}

TEST_CASE("loader renormalizes rows off by <= 1e-9 with a warning") {
  FinitePOMDP m = m1_fixture();
  Json j = model_to_json(m);
  j["P"][0][0][0] = 0.9 + 5e-10;
  std::vector<std::string> warnings;
  const FinitePOMDP loaded = model_from_json(j, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(validate_model(loaded).ok());
  // larger drift is left for the validator
  j["P"][0][0][0] = 0.95;
  warnings.clear();
  const FinitePOMDP bad = model_from_json(j, &warnings);
  CHECK(warnings.empty());
  CHECK(!validate_model(bad).ok());
}

TEST_CASE("malformed model JSON raises SchemaError") {
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"states": 2})")), SchemaError);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"states": "two"})")), SchemaError);
  Json j = model_to_json(m1_fixture());
  j["assumption"] = "Q";
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
}

TEST_CASE("model files round-trip through disk") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "beliefmdp_roundtrip_model.json";
  Rng rng(8107);
  const FinitePOMDP m = testutil::random_model(rng, 3, 3, 2, 0.9, CostAssumption::P);
  save_model(m, path.string());
  const FinitePOMDP back = load_model(path.string());
  CHECK(back.cost.data == m.cost.data);
  for (std::size_t a = 0; a < m.n_actions; ++a) {
    CHECK(back.transition[a].data == m.transition[a].data);
  }
  fs::remove(path);
  CHECK_THROWS_AS(load_model(path.string()), SchemaError);  // missing file
}

TEST_CASE("parametric family JSON round trip") {
  Rng rng(8108);
  ParametricPOMDP f;
  f.n_states = 2;
  f.n_obs = 3;
  f.transition = {testutil::random_stochastic(rng, 2, 2),
                  testutil::random_stochastic(rng, 2, 2), LinkKind::smoothstep};
  f.observation = {testutil::random_stochastic(rng, 2, 3),
                   testutil::random_stochastic(rng, 2, 3), LinkKind::step};
  Json j;
  j["states"] = f.n_states;
  j["observations"] = f.n_obs;
  j["P"] = family_to_json(f.transition);
  j["Q"] = family_to_json(f.observation);
  const ParametricPOMDP back = parametric_model_from_json(j);
  CHECK(back.transition.k0.data == f.transition.k0.data);
  CHECK(back.transition.link == LinkKind::smoothstep);
  CHECK(back.observation.link == LinkKind::step);
  // shape mismatch is a schema error
  j["observations"] = 5;
  CHECK_THROWS_AS(parametric_model_from_json(j), SchemaError);
}

TEST_CASE("measure and instance JSON round trips") {
  const GroundMetric metric{GroundMetric::Kind::l1, 2};
  const FiniteMeasure mu(metric, {{0.0, 1.0}, {0.5, 0.25}}, {0.4, 0.6});
  const FiniteMeasure back = measure_from_json(measure_to_json(mu));
  CHECK(back.metric() == mu.metric());
  CHECK(back.support() == mu.support());
  CHECK(back.weights() == mu.weights());

  LinearGaussianInstance inst;
  inst.a = Matrix(2, 2, {0.9, 0.1, 0.0, 0.8});
  inst.b = Matrix(2, 1, {0.5, 0.0});
  inst.c = Matrix(1, 2, {1.0, 0.0});
  inst.process_cov = Matrix(2, 2, {0.01, 0.002, 0.002, 0.01});
  inst.obs_cov = Matrix(1, 1, {0.25});
  inst.prior_mean = {0.0, 0.1};
  inst.prior_cov = Matrix::identity(2);
  const LinearGaussianInstance inst_back = instance_from_json(instance_to_json(inst));
  CHECK(inst_back.a.data == inst.a.data);
  CHECK(inst_back.process_cov.data == inst.process_cov.data);
  CHECK(inst_back.prior_mean == inst.prior_mean);
}
