// Acceptance suite: one self-contained run per criterion, each printed as a
// single PASS/FAIL line with the measured extremes and elapsed time. The
// process exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "beliefmdp/belief.hpp"
#include "beliefmdp/continuity.hpp"
#include "beliefmdp/filtration.hpp"
#include "beliefmdp/measures.hpp"
#include "beliefmdp/pomdp.hpp"
#include "beliefmdp/solver.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace beliefmdp;

namespace {

struct Criterion {
  bool pass = false;
  std::string detail;
};

std::vector<std::size_t> mask_to_set(std::uint32_t mask, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask & (1u << i)) out.push_back(i);
  }
  return out;
}

// 1. Reconstruction identity (all set pairs, 100 random models, <= 1e-12)
Criterion reconstruction_identity() {
  Rng rng(20250801);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nx = 2 + rng.next_u64() % 5;
    const std::size_t ny = 2 + rng.next_u64() % 5;
    const std::size_t na = 1 + rng.next_u64() % 6;
    const FinitePOMDP m = testutil::random_model(rng, nx, ny, na, 0.9, CostAssumption::P);
    const Belief z(testutil::random_simplex(rng, nx));
    for (std::size_t a = 0; a < na; ++a) {
      const auto marginal = observation_marginal(m.transition[a], m.observation[a], z);
      std::vector<Belief> posteriors;
      for (std::size_t y = 0; y < ny; ++y) {
        posteriors.push_back(marginal[y] > 0.0 ? bayes_posterior(m, z, a, y)
                                               : Belief::uniform(nx));
      }
      for (std::uint32_t bm = 0; bm < (1u << nx); ++bm) {
        const auto b = mask_to_set(bm, nx);
        for (std::uint32_t cm = 0; cm < (1u << ny); ++cm) {
          const auto c = mask_to_set(cm, ny);
          KahanSum mixture;
          for (std::size_t y : c) {
            if (!(marginal[y] > 0.0)) continue;
            double h_mass = 0.0;
            for (std::size_t x : b) h_mass += posteriors[y][x];
            mixture.add(h_mass * marginal[y]);
          }
          worst = std::max(worst, std::fabs(joint_R(m, z, a, b, c) - mixture.value()));
        }
      }
    }
  }
  std::ostringstream os;
  os << "max |joint_R - sum H*R'| = " << worst << " over 100 models, all (B,C)";
  return {worst <= 1e-12, os.str()};
}

// 2. Branch weights vs Monte Carlo (1e5 draws, 4 standard errors)
Criterion filter_vs_monte_carlo() {
  const FinitePOMDP m = testutil::m1_fixture();
  const Belief z = Belief::uniform(2);
  const BeliefBranchSet q = belief_kernel_q(m, z, 0);
  constexpr std::size_t kDraws = 100000;
  Rng rng(424242);
  std::vector<std::size_t> counts(m.n_obs, 0);
  for (std::size_t i = 0; i < kDraws; ++i) {
    const std::size_t x = rng.categorical(z.weights());
    const std::size_t next = rng.categorical(m.transition[0].row(x));
    counts[rng.categorical(m.observation[0].row(next))] += 1;
  }
  bool pass = true;
  double worst_sigma = 0.0;
  for (const auto& branch : q.branches) {
    const double p = branch.weight;
    const double se = std::sqrt(p * (1.0 - p) / kDraws);
    const double freq = static_cast<double>(counts[branch.observation]) / kDraws;
    worst_sigma = std::max(worst_sigma, std::fabs(freq - p) / se);
    pass = pass && std::fabs(freq - p) <= 4.0 * se;
  }
  std::ostringstream os;
  os << "worst deviation " << worst_sigma << " standard errors over " << kDraws << " draws";
  return {pass, os.str()};
}

// 3. Proof-term bounds on 1e3 random probes of the fixture family (<= 1e-12)
Criterion proof_bounds() {
  const ParametricPOMDP family = testutil::tv_continuous_family();
  Rng rng(20250803);
  double worst = -1.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Belief z(testutil::random_simplex(rng, family.n_states));
    const Belief z_n(testutil::random_simplex(rng, family.n_states));
    const double a = rng.uniform();
    const double a_n = rng.uniform();
    std::vector<std::size_t> b, c;
    for (std::size_t x = 0; x < family.n_states; ++x) {
      if (rng.uniform() < 0.5) b.push_back(x);
    }
    for (std::size_t y = 0; y < family.n_obs; ++y) {
      if (rng.uniform() < 0.5) c.push_back(y);
    }
    const ProofTerms t = proof_term_decomposition(family, z_n, a_n, z, a, b, c);
    worst = std::max({worst, t.i1 - t.bound1, t.i2 - t.bound2,
                      t.total_difference - (t.i1 + t.i2 + t.i3)});
  }
  std::ostringstream os;
  os << "max inequality violation " << worst << " over 1000 probes";
  return {worst <= 1e-12, os.str()};
}

// 4. Theorem-4 fixture decays below 1e-6 in 64 steps; step fixture stays > 1e-2
Criterion continuity_fixtures() {
  const std::size_t horizon = 64;
  const Belief z = Belief::uniform(2);
  const Belief z_start({0.9, 0.1});
  const auto z_seq = geometric_belief_sequence(z, z_start, horizon);
  const auto a_pos = geometric_action_sequence(0.4, 0.2, horizon);
  const ContinuityReport positive =
      q_weak_continuity_report(testutil::tv_continuous_family(), z, 0.4, z_seq, a_pos);

  const auto a_neg = geometric_action_sequence(0.5, -0.25, horizon);
  const std::vector<Belief> z_const(horizon, z);
  const ContinuityReport negative =
      q_weak_continuity_report(testutil::step_family(), z, 0.5, z_const, a_neg);
  double neg_min = std::numeric_limits<double>::infinity();
  for (double m : negative.moduli) neg_min = std::min(neg_min, m);

  const bool pass = positive.verdict == Verdict::decaying && positive.moduli.back() < 1e-6 &&
                    neg_min > 1e-2;
  std::ostringstream os;
  os << "positive final modulus " << positive.moduli.back() << " (" << to_string(positive.verdict)
     << "); negative minimum " << neg_min;
  return {pass, os.str()};
}

// 5. Equicontinuity sup equals exhaustive subset enumeration (|Y| <= 12)
Criterion equicontinuity_exact() {
  Rng rng(20250805);
  bool pass = true;
  std::size_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nx = 2 + rng.next_u64() % 3;
    const std::size_t ny = 2 + rng.next_u64() % 11;  // up to 12 observations
    const ParametricPOMDP family = testutil::random_linear_family(rng, nx, ny);
    const Belief z(testutil::random_simplex(rng, nx));
    const Belief z_n(testutil::random_simplex(rng, nx));
    const double a = rng.uniform();
    const double a_n = rng.uniform();
    std::vector<std::size_t> b;
    for (std::size_t x = 0; x < nx; ++x) {
      if (rng.uniform() < 0.6) b.push_back(x);
    }
    const std::vector<Belief> z_seq{z_n};
    const std::vector<double> a_seq{a_n};
    const ContinuityReport report = equicontinuity_report(family, b, z, a, z_seq, a_seq);

    // exhaustive route: per-observation joint masses, then every subset
    const Matrix p_n = family.transition_at(a_n), q_n = family.observation_at(a_n);
    const Matrix p = family.transition_at(a), q = family.observation_at(a);
    std::vector<double> m_n(ny), m_t(ny);
    for (std::size_t y = 0; y < ny; ++y) {
      const std::vector<std::size_t> c{y};
      m_n[y] = joint_probability(p_n, q_n, z_n, b, c);
      m_t[y] = joint_probability(p, q, z, b, c);
    }
    pass = pass && report.moduli[0] == oracle::subset_sup(m_n, m_t);
    ++checked;
  }
  std::ostringstream os;
  os << (pass ? "exact match" : "MISMATCH") << " on " << checked << " instances";
  return {pass, os.str()};
}

// 6. Finite-horizon solver equals policy-tree enumeration (<= 1e-10)
Criterion solver_oracle() {
  Rng rng(20250806);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nx = 2 + rng.next_u64() % 2;
    const std::size_t ny = 2 + rng.next_u64() % 2;
    const std::size_t na = 2 + rng.next_u64() % 2;
    const std::size_t horizon = rng.next_u64() % 4;
    const FinitePOMDP m =
        testutil::random_model(rng, nx, ny, na, 0.7 + 0.3 * rng.uniform(), CostAssumption::P);
    const Belief prior(testutil::random_simplex(rng, nx));
    const double dp = solve_finite_horizon(m, prior, 0, horizon).value;
    const double brute = oracle::best_policy_tree_value(
        m, oracle::initial_belief_by_formula(m, prior.weights(), 0), horizon);
    worst = std::max(worst, std::fabs(dp - brute));
  }
  std::ostringstream os;
  os << "max |dp - enumeration| = " << worst << " over 50 models";
  return {worst <= 1e-10, os.str()};
}

// 7. Contraction of one sweep and monotonicity under (P)
Criterion contraction_and_monotonicity() {
  Rng rng(20250807);
  const FinitePOMDP m = testutil::m1_fixture(0.9);
  const BeliefGridDP dp(m, 16);
  double worst_ratio = 0.0;
  bool pass = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(dp.grid().size()), w(dp.grid().size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = 10.0 * rng.uniform() - 5.0;
      w[i] = 10.0 * rng.uniform() - 5.0;
    }
    double dist = 0.0, tdist = 0.0;
    const auto tv = dp.sweep(v).first;
    const auto tw = dp.sweep(w).first;
    for (std::size_t i = 0; i < v.size(); ++i) {
      dist = std::max(dist, std::fabs(v[i] - w[i]));
      tdist = std::max(tdist, std::fabs(tv[i] - tw[i]));
    }
    pass = pass && tdist <= m.alpha * dist + 1e-12;
    if (dist > 0.0) worst_ratio = std::max(worst_ratio, tdist / dist);
  }

  const FinitePOMDP pm = testutil::random_model(rng, 3, 2, 2, 1.0, CostAssumption::P);
  const BeliefGridDP pdp(pm, 10);
  std::vector<double> v(pdp.grid().size(), 0.0);
  for (int sweep = 0; sweep < 100; ++sweep) {
    const auto next = pdp.sweep(v).first;
    for (std::size_t i = 0; i < v.size(); ++i) pass = pass && next[i] >= v[i] - 1e-12;
    v = next;
  }
  std::ostringstream os;
  os << "worst contraction ratio " << worst_ratio << " (alpha " << m.alpha
     << "); 100 sweeps monotone under P";
  return {pass, os.str()};
}

// 8. Cost-shift identity within 1e-9 and identical argmins (10 random models)
Criterion cost_shift_identity() {
  Rng rng(20250808);
  double worst = 0.0;
  bool argmins_equal = true;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t nx = 2 + rng.next_u64() % 2;
    FinitePOMDP m = testutil::random_model(rng, nx, 2, 2, 0.3 + 0.6 * rng.uniform(),
                                           CostAssumption::D, -2.0, 5.0);
    double min_cost = m.cost.data[0];
    for (double c : m.cost.data) min_cost = std::min(min_cost, c);
    const double shift = std::max(0.0, -min_cost);
    const ShiftedModel hat = shift_costs(m, shift);
    const InfiniteHorizonResult base = solve_infinite_horizon(m, 12, 1e-10);
    const InfiniteHorizonResult shifted = solve_infinite_horizon(hat.model, 12, 1e-10);
    for (std::size_t i = 0; i < base.table.values.size(); ++i) {
      worst = std::max(worst, std::fabs(shifted.table.values[i] - base.table.values[i] -
                                        hat.value_offset));
      argmins_equal = argmins_equal && shifted.policy.actions[i] == base.policy.actions[i];
    }
  }
  std::ostringstream os;
  os << "max |vhat - v - K/(1-alpha)| = " << worst
     << (argmins_equal ? ", argmins identical" : ", ARGMIN MISMATCH");
  return {worst <= 1e-9 && argmins_equal, os.str()};
}

// 9. Kalman cross-validation: errors strictly decrease, final < 0.02
Criterion kalman_cross_validation() {
  const std::vector<std::size_t> grids{51, 101, 201};
  const auto table = compare_filters(default_demo_instance(), 20, grids, 12345);
  const bool decreasing =
      table[1].sup_error < table[0].sup_error && table[2].sup_error < table[1].sup_error;
  const bool small = table[2].sup_error < 0.02;
  std::ostringstream os;
  os << "sup errors " << table[0].sup_error << " > " << table[1].sup_error << " > "
     << table[2].sup_error << " (final < 0.02: " << (small ? "yes" : "NO") << ")";
  return {decreasing && small, os.str()};
}

// 10. LP metric vs exhaustive eps-set verification on a 50-pair corpus
Criterion lp_metric_oracle() {
  Rng rng(20250810);
  const GroundMetric line{GroundMetric::Kind::euclidean, 1};
  const GroundMetric plane{GroundMetric::Kind::euclidean, 2};
  std::vector<std::pair<FiniteMeasure, FiniteMeasure>> corpus;
  const auto random_measure = [&](const GroundMetric& metric) {
    const std::size_t n = 1 + rng.next_u64() % 6;
    std::vector<Point> support(n);
    for (auto& p : support) {
      p.resize(metric.dim);
      for (double& v : p) v = 2.0 * rng.uniform() - 1.0;
    }
    return FiniteMeasure(metric, std::move(support), testutil::random_simplex(rng, n));
  };
  corpus.emplace_back(FiniteMeasure::dirac(line, {0.0}), FiniteMeasure::dirac(line, {0.4}));
  corpus.emplace_back(FiniteMeasure::dirac(line, {0.0}), FiniteMeasure::dirac(line, {2.0}));
  {
    const FiniteMeasure same = random_measure(line);
    corpus.emplace_back(same, same);
  }
  corpus.emplace_back(FiniteMeasure(line, {{0.0}, {1.0}}, {0.5, 0.5}),
                      FiniteMeasure::dirac(line, {0.0}));
  while (corpus.size() < 50) {
    const GroundMetric& metric = corpus.size() % 2 == 0 ? line : plane;
    corpus.emplace_back(random_measure(metric), random_measure(metric));
  }
  double worst = 0.0;
  for (const auto& [mu, nu] : corpus) {
    worst = std::max(worst, std::fabs(lp_distance(mu, nu) - oracle::lp_by_sets(mu, nu)));
  }
  std::ostringstream os;
  os << "max |maxflow - set enumeration| = " << worst << " over " << corpus.size() << " pairs";
  return {worst <= 1e-6, os.str()};
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    double budget_seconds;
    std::function<Criterion()> run;
  };
  const std::vector<Entry> entries{
      {"reconstruction identity to 1e-12", 10.0, reconstruction_identity},
      {"branch weights vs Monte Carlo (4 SE)", 5.0, filter_vs_monte_carlo},
      {"proof-term bounds to 1e-12", 10.0, proof_bounds},
      {"continuity fixtures: decay vs jump", 30.0, continuity_fixtures},
      {"equicontinuity sup exact vs subsets", 10.0, equicontinuity_exact},
      {"finite-horizon solver vs enumeration", 60.0, solver_oracle},
      {"contraction + monotone sweeps", 30.0, contraction_and_monotonicity},
      {"cost-shift identity to 1e-9", 30.0, cost_shift_identity},
      {"Kalman cross-validation", 60.0, kalman_cross_validation},
      {"Levy-Prokhorov vs set enumeration", 30.0, lp_metric_oracle},
  };
  int failures = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Criterion result;
    try {
      result = entries[i].run();
    } catch (const std::exception& e) {
      result = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds < entries[i].budget_seconds;
    const bool pass = result.pass && in_budget;
    std::printf("[%s] criterion %zu: %s -- %s [%.2f s / %.0f s budget]\n",
                pass ? "PASS" : "FAIL", i + 1, entries[i].name, result.detail.c_str(),
                seconds, entries[i].budget_seconds);
    if (!pass) ++failures;
  }
  return failures;
}
