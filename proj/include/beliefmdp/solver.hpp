#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "belief.hpp"
#include "errors.hpp"
#include "pomdp.hpp"

namespace beliefmdp {

constexpr std::size_t kNoAction = static_cast<std::size_t>(-1);
constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

// ============================================================================
// Simplex grid
// ============================================================================

/**
 * Regular grid on the probability simplex: all weight vectors with
 * coordinates k_i / r summing to 1, enumerated in lexicographic order of
 * (k_0, ..., k_{n-1}).
 *
 * Projection is nearest-neighbor in L1 via floor + largest-remainder
 * rounding; ties hand the spare increments to the highest indices, which
 * yields the lexicographically smallest grid node among the nearest ones.
 */
class SimplexGrid {
 public:
  SimplexGrid(std::size_t dim, std::size_t resolution)
      : dim_(dim), resolution_(resolution) {
    if (dim == 0 || resolution == 0) {
      throw DomainError("SimplexGrid: dimension and resolution must be positive");
    }
    std::vector<int> prefix(dim, 0);
    enumerate(prefix, 0, static_cast<int>(resolution));
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_[nodes_[i]] = i;
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t resolution() const { return resolution_; }

  Belief node(std::size_t i) const {
    std::vector<double> w(dim_);
    for (std::size_t k = 0; k < dim_; ++k) {
      w[k] = static_cast<double>(nodes_[i][k]) / static_cast<double>(resolution_);
    }
    return Belief(std::move(w));
  }

  std::size_t project(const Belief& z) const {
    if (z.size() != dim_) throw DomainError("SimplexGrid: belief dimension mismatch");
    const double r = static_cast<double>(resolution_);
    std::vector<int> counts(dim_);
    std::vector<double> fractions(dim_);
    int assigned = 0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double u = z[i] * r;
      counts[i] = static_cast<int>(std::floor(u));
      fractions[i] = u - static_cast<double>(counts[i]);
      assigned += counts[i];
    }
    int remainder = static_cast<int>(resolution_) - assigned;
    std::vector<std::size_t> order(dim_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (fractions[a] != fractions[b]) return fractions[a] > fractions[b];
      return a > b;  // tie: increment higher indices -> lex-smallest node
    });
    for (int k = 0; k < remainder; ++k) counts[order[static_cast<std::size_t>(k)]] += 1;
    const auto it = index_.find(counts);
    if (it == index_.end()) throw CoverageError("SimplexGrid: projection failed");
    return it->second;
  }

 private:
  void enumerate(std::vector<int>& prefix, std::size_t pos, int remaining) {
    if (pos + 1 == dim_) {
      prefix[pos] = remaining;
      nodes_.push_back(prefix);
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      prefix[pos] = k;
      enumerate(prefix, pos + 1, remaining - k);
    }
  }

  std::size_t dim_;
  std::size_t resolution_;
  std::vector<std::vector<int>> nodes_;
  std::map<std::vector<int>, std::size_t> index_;
};

// ============================================================================
// Value tables and policies
// ============================================================================

struct ValueTable {
  enum class Kind { tree, grid };

  Kind kind = Kind::grid;
  std::size_t grid_resolution = 0;  // denominator when kind == grid
  std::vector<Belief> beliefs;
  std::vector<double> values;
};

struct Policy {
  std::vector<std::size_t> actions;  // aligned with the ValueTable nodes
};

struct BackupResult {
  double value = std::numeric_limits<double>::infinity();
  std::size_t action = 0;
};

// One-point Bellman backup with a caller-supplied continuation value:
// min over a of c̄(z,a) + alpha * sum_branches weight * v(posterior).
// Ties break to the lowest action index.
template <typename ValueFn>
BackupResult backup_with(const FinitePOMDP& model, const Belief& z, ValueFn&& value_of) {
  BackupResult best;
  bool first = true;
  for (std::size_t a = 0; a < model.n_actions; ++a) {
    const double stage = expected_cost(model, z, a);
    double candidate = stage;
    if (std::isfinite(stage) && model.alpha != 0.0) {
      const BeliefBranchSet q = belief_kernel_q(model, z, a);
      KahanSum acc;
      for (const auto& branch : q.branches) {
        acc.add(branch.weight * value_of(branch.posterior));
      }
      candidate = stage + model.alpha * acc.value();
    }
    if (first || candidate < best.value) {
      best.value = candidate;
      best.action = a;
      first = false;
    }
  }
  return best;
}

/**
 * Bellman backup against an existing ValueTable. Grid tables project
 * posteriors to the nearest node; tree tables require every posterior to be
 * present in the belief set (L1 within 1e-12) and throw CoverageError
 * otherwise, since no projection rule is configured for them.
 */
inline BackupResult bellman_backup(const FinitePOMDP& model, const ValueTable& table,
                                   const Belief& z) {
  if (table.kind == ValueTable::Kind::grid) {
    SimplexGrid grid(model.n_states, table.grid_resolution);
    if (grid.size() != table.beliefs.size()) {
      throw DomainError("bellman_backup: table does not match its grid resolution");
    }
    return backup_with(model, z, [&](const Belief& posterior) {
      return table.values[grid.project(posterior)];
    });
  }
  return backup_with(model, z, [&](const Belief& posterior) {
    for (std::size_t i = 0; i < table.beliefs.size(); ++i) {
      if (table.beliefs[i].size() == posterior.size() &&
          l1_distance(table.beliefs[i], posterior) <= 1e-12) {
        return table.values[i];
      }
    }
    throw CoverageError("bellman_backup: posterior not representable in the belief set");
  });
}

// ============================================================================
// Finite horizon: exact DP on the reachable belief tree
// ============================================================================

struct PolicyTreeNode {
  Belief belief;
  std::size_t depth = 0;                 // root is 0
  std::size_t parent = kNoNode;
  std::size_t observation = kNoNode;     // observation leading here from parent
  std::size_t action = kNoAction;        // chosen action; kNoAction at leaves
  double value = 0.0;                    // v_{N - depth}(belief)
};

struct FiniteHorizonResult {
  double value = 0.0;                    // v_N at the root belief
  std::vector<PolicyTreeNode> tree;      // root first; optimal-action branches only
  std::size_t evaluations = 0;           // distinct (belief, horizon) DP states
};

/**
 * Exact dynamic program on the reachable belief tree rooted at
 * initial_belief(prior, y0): v_0 = 0 and v_{k+1} = backup(v_k). Returns the
 * horizon-N value at the root together with the nonrandomized Markov policy
 * tree that follows the argmin actions. Throws BudgetExceeded once the
 * number of distinct DP states passes node_budget (default 10^6).
 */
inline FiniteHorizonResult solve_finite_horizon(const FinitePOMDP& model,
                                                const Belief& prior, std::size_t y0,
                                                std::size_t horizon,
                                                std::size_t node_budget = 1000000) {
  const Belief root = initial_belief(model, prior, y0);

  using Key = std::pair<std::size_t, std::vector<double>>;
  std::map<Key, BackupResult> memo;
  std::size_t evaluations = 0;

  auto value_rec = [&](auto&& self, const Belief& z, std::size_t k) -> BackupResult {
    if (k == 0) return {0.0, kNoAction};
    const Key key{k, z.weights()};
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    if (++evaluations > node_budget) {
      throw BudgetExceeded("solve_finite_horizon: reachable tree exceeds node budget");
    }
    const BackupResult result = backup_with(
        model, z, [&](const Belief& posterior) { return self(self, posterior, k - 1).value; });
    memo.emplace(key, result);
    return result;
  };

  FiniteHorizonResult out;
  const BackupResult root_result = value_rec(value_rec, root, horizon);
  out.value = root_result.value;
  out.evaluations = evaluations;

  // Second pass: materialize the tree along optimal actions (all memo hits).
  out.tree.push_back({root, 0, kNoNode, kNoNode, horizon == 0 ? kNoAction : root_result.action,
                      root_result.value});
  for (std::size_t i = 0; i < out.tree.size(); ++i) {
    const std::size_t depth = out.tree[i].depth;
    if (depth >= horizon) continue;
    const std::size_t remaining = horizon - depth;
    const Belief z = out.tree[i].belief;
    const std::size_t chosen = value_rec(value_rec, z, remaining).action;
    out.tree[i].action = chosen;
    if (remaining == 1) continue;  // children are value-0 leaves; omit them
    const BeliefBranchSet q = belief_kernel_q(model, z, chosen);
    for (const auto& branch : q.branches) {
      const BackupResult child = value_rec(value_rec, branch.posterior, remaining - 1);
      out.tree.push_back({branch.posterior, depth + 1, i, branch.observation,
                          remaining - 1 == 0 ? kNoAction : child.action, child.value});
    }
  }
  return out;
}

// ============================================================================
// Infinite horizon: value iteration on a simplex grid
// ============================================================================

/**
 * Projected belief dynamics on a simplex grid: every posterior reachable
 * from a grid node is replaced by its nearest grid node, which keeps one
 * backup sweep an alpha-contraction in the sup norm. Precomputes stage costs
 * and projected branch lists once; sweeps are then pure table lookups.
 */
class BeliefGridDP {
 public:
  BeliefGridDP(const FinitePOMDP& model, std::size_t resolution)
      : model_(model), grid_(model.n_states, resolution) {
    stage_cost_.resize(grid_.size());
    branches_.resize(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const Belief z = grid_.node(i);
      stage_cost_[i].resize(model.n_actions);
      branches_[i].resize(model.n_actions);
      for (std::size_t a = 0; a < model.n_actions; ++a) {
        stage_cost_[i][a] = expected_cost(model, z, a);
        if (!std::isfinite(stage_cost_[i][a])) continue;
        const BeliefBranchSet q = belief_kernel_q(model, z, a);
        for (const auto& branch : q.branches) {
          branches_[i][a].push_back({branch.weight, grid_.project(branch.posterior)});
        }
      }
    }
  }

  const SimplexGrid& grid() const { return grid_; }

  // One synchronous backup sweep: returns (Tv, argmin actions).
  std::pair<std::vector<double>, std::vector<std::size_t>> sweep(
      const std::vector<double>& v) const {
    if (v.size() != grid_.size()) throw DomainError("BeliefGridDP: value size mismatch");
    std::vector<double> next(grid_.size());
    std::vector<std::size_t> actions(grid_.size(), 0);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_action = 0;
      bool first = true;
      for (std::size_t a = 0; a < model_.n_actions; ++a) {
        double candidate = stage_cost_[i][a];
        if (std::isfinite(candidate) && model_.alpha != 0.0) {
          KahanSum acc;
          for (const auto& [weight, node] : branches_[i][a]) {
            acc.add(weight * v[node]);
          }
          candidate += model_.alpha * acc.value();
        }
        if (first || candidate < best) {
          best = candidate;
          best_action = a;
          first = false;
        }
      }
      next[i] = best;
      actions[i] = best_action;
    }
    return {std::move(next), std::move(actions)};
  }

 private:
  struct ProjectedBranch {
    double weight;
    std::size_t node;
  };

  FinitePOMDP model_;
  SimplexGrid grid_;
  std::vector<std::vector<double>> stage_cost_;                    // [node][action]
  std::vector<std::vector<std::vector<ProjectedBranch>>> branches_;  // [node][action]
};

struct InfiniteHorizonResult {
  ValueTable table;
  Policy policy;
  std::size_t iterations = 0;
  double final_sup_diff = 0.0;
  bool converged = false;
  std::string stopping_criterion;
};

/**
 * Value iteration from v = 0 on the simplex grid.
 *
 * Under (D) (alpha < 1) sweeps stop once the sup-norm successive difference
 * drops to tol * (1 - alpha) / (2 alpha), which pins the result within tol
 * of the fixed point of the projected dynamics. Under (P) with alpha = 1 no
 * stopping rule is sound; the solver runs the declared sweep budget and
 * reports the monotone lower envelope it reached. Requesting alpha = 1 under
 * flag D throws AssumptionViolation.
 */
inline InfiniteHorizonResult solve_infinite_horizon(const FinitePOMDP& model,
                                                    std::size_t grid_resolution,
                                                    double tol,
                                                    std::size_t budget_sweeps = 1000) {
  if (!(tol > 0.0)) throw DomainError("solve_infinite_horizon: tol must be positive");
  if (model.alpha >= 1.0 && model.assumption == CostAssumption::D) {
    throw AssumptionViolation("solve_infinite_horizon: alpha = 1 requires assumption P");
  }
  if (model.alpha > 1.0) {
    throw AssumptionViolation("solve_infinite_horizon: alpha > 1 is not a valid model");
  }
  const bool contraction_mode = model.alpha < 1.0;
  const double threshold =
      model.alpha == 0.0 ? std::numeric_limits<double>::infinity()
                         : tol * (1.0 - model.alpha) / (2.0 * model.alpha);
  const std::size_t max_sweeps = contraction_mode ? 1000000 : budget_sweeps;

  BeliefGridDP dp(model, grid_resolution);
  std::vector<double> v(dp.grid().size(), 0.0);
  std::vector<std::size_t> actions(dp.grid().size(), 0);

  InfiniteHorizonResult out;
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    auto [next, argmin] = dp.sweep(v);
    double diff = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (next[i] == v[i]) continue;  // covers matching infinities
      diff = std::max(diff, std::fabs(next[i] - v[i]));
    }
    v = std::move(next);
    actions = std::move(argmin);
    out.iterations = sweep;
    out.final_sup_diff = diff;
    if (contraction_mode && diff <= threshold) {
      out.converged = true;
      out.stopping_criterion = "contraction";
      break;
    }
  }
  if (!out.converged) {
    out.stopping_criterion = contraction_mode ? "sweep-budget" : "iteration-budget";
  }

  out.table.kind = ValueTable::Kind::grid;
  out.table.grid_resolution = grid_resolution;
  out.table.beliefs.reserve(dp.grid().size());
  for (std::size_t i = 0; i < dp.grid().size(); ++i) out.table.beliefs.push_back(dp.grid().node(i));
  out.table.values = std::move(v);
  out.policy.actions = std::move(actions);
  return out;
}

// ============================================================================
// Cost shift
// ============================================================================

struct ShiftedModel {
  FinitePOMDP model;     // cost replaced by c + K, assumption (P)
  double value_offset;   // v̂ = v + K / (1 - alpha) at every belief
};

/**
 * Shifts the cost function by K >= -min c, converting a discounted model
 * into an equivalent positive model. Values correspond exactly via
 * v̂ = v + K / (1 - alpha); argmin actions are untouched. Undefined for
 * alpha = 1 (the offset diverges) -> AssumptionViolation.
 */
inline ShiftedModel shift_costs(const FinitePOMDP& model, double shift) {
  if (model.alpha >= 1.0) {
    throw AssumptionViolation("shift_costs: offset K/(1-alpha) undefined for alpha = 1");
  }
  double min_cost = std::numeric_limits<double>::infinity();
  for (double c : model.cost.data) {
    if (std::isfinite(c)) min_cost = std::min(min_cost, c);
  }
  if (shift < -min_cost) {
    throw DomainError("shift_costs: K < -min c leaves negative costs");
  }
  ShiftedModel out{model, shift / (1.0 - model.alpha)};
  for (double& c : out.model.cost.data) {
    if (std::isfinite(c)) c += shift;
  }
  out.model.assumption = CostAssumption::P;
  return out;
}

}  // namespace beliefmdp
