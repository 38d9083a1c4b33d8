#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measures.hpp"
#include "numeric.hpp"
#include "pomdp.hpp"

namespace beliefmdp {

// ============================================================================
// Belief
// ============================================================================

// Posterior distribution of the hidden state: a probability vector over X.
class Belief {
 public:
  static constexpr double kMassTolerance = 1e-12;

  explicit Belief(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw DomainError("Belief: empty weight vector");
    KahanSum sum;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] >= 0.0)) {
        throw DomainError("Belief: negative weight at state " + std::to_string(i));
      }
      sum.add(weights_[i]);
    }
    if (std::fabs(sum.value() - 1.0) > kMassTolerance) {
      throw DomainError("Belief: weights sum to " + std::to_string(sum.value()));
    }
  }

  static Belief uniform(std::size_t n) {
    return Belief(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static Belief dirac(std::size_t n, std::size_t at) {
    std::vector<double> w(n, 0.0);
    w.at(at) = 1.0;
    return Belief(std::move(w));
  }

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const { return weights_; }

  bool operator==(const Belief&) const = default;

 private:
  std::vector<double> weights_;
};

inline double l1_distance(const Belief& a, const Belief& b) {
  if (a.size() != b.size()) throw DomainError("l1_distance: belief sizes differ");
  KahanSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(std::fabs(a[i] - b[i]));
  return acc.value();
}

// ============================================================================
// Single-action primitives
// ============================================================================
//
// These work on one action's kernels: p is the |X| x |X| transition slice
// (row x -> P(.|x,a)) and q_obs the |X| x |Y| observation slice
// (row x' -> Q(.|a,x')). The FinitePOMDP wrappers below and the continuity
// lab (where the action is a real parameter, not an index) both share them.

// Predicted next-state marginal: (z P)(x') = sum_x P(x'|x,a) z(x).
inline std::vector<double> predicted_marginal(const Matrix& p, const Belief& z) {
  if (p.rows != z.size()) throw DomainError("predicted_marginal: shape mismatch");
  std::vector<double> out(p.cols, 0.0);
  for (std::size_t next = 0; next < p.cols; ++next) {
    KahanSum acc;
    for (std::size_t x = 0; x < p.rows; ++x) acc.add(p(x, next) * z[x]);
    out[next] = acc.value();
  }
  return out;
}

// Joint probability R(B x C | z, a) that the next state lands in B and the
// observation in C: sum_x sum_{x' in B} [sum_{y in C} Q(y|a,x')] P(x'|x,a) z(x).
inline double joint_probability(const Matrix& p, const Matrix& q_obs, const Belief& z,
                                std::span<const std::size_t> state_set,
                                std::span<const std::size_t> obs_set) {
  const std::vector<double> predicted = predicted_marginal(p, z);
  KahanSum acc;
  for (std::size_t next : state_set) {
    if (next >= predicted.size()) throw DomainError("joint_probability: state index out of range");
    KahanSum q_mass;
    for (std::size_t y : obs_set) {
      if (y >= q_obs.cols) throw DomainError("joint_probability: observation index out of range");
      q_mass.add(q_obs(next, y));
    }
    acc.add(q_mass.value() * predicted[next]);
  }
  return acc.value();
}

// Observation marginal R'(y | z, a) as a plain probability vector over Y.
inline std::vector<double> observation_marginal(const Matrix& p, const Matrix& q_obs,
                                                const Belief& z) {
  const std::vector<double> predicted = predicted_marginal(p, z);
  std::vector<double> out(q_obs.cols, 0.0);
  for (std::size_t y = 0; y < q_obs.cols; ++y) {
    KahanSum acc;
    for (std::size_t next = 0; next < q_obs.rows; ++next) {
      acc.add(q_obs(next, y) * predicted[next]);
    }
    out[y] = acc.value();
  }
  return out;
}

/**
 * Bayes posterior H(.|z,a,y): the next-state distribution given that y was
 * observed. Defined only where R'(y|z,a) > 0; conditioning on a
 * zero-probability observation throws UnobservableEvidence rather than
 * inventing a value (H is only determined R'-almost surely).
 */
inline Belief bayes_posterior(const Matrix& p, const Matrix& q_obs, const Belief& z,
                              std::size_t y) {
  if (y >= q_obs.cols) throw DomainError("bayes_posterior: observation index out of range");
  const std::vector<double> predicted = predicted_marginal(p, z);
  std::vector<double> numer(q_obs.rows, 0.0);
  KahanSum norm;
  for (std::size_t next = 0; next < q_obs.rows; ++next) {
    numer[next] = q_obs(next, y) * predicted[next];
    norm.add(numer[next]);
  }
  const double total = norm.value();
  if (!(total > 0.0)) {
    throw UnobservableEvidence("bayes_posterior: observation " + std::to_string(y) +
                               " has probability zero");
  }
  for (double& v : numer) v /= total;
  return Belief(std::move(numer));
}

// ============================================================================
// Belief transition kernel q
// ============================================================================

struct BeliefBranch {
  std::size_t observation;  // smallest y mapped to this atom after merging
  double weight;            // R'(y|z,a) (summed over merged observations)
  Belief posterior;         // H(z,a,y)
};

/**
 * The measure q(.|z,a) on belief space as a finite mixture: one branch per
 * observation of positive probability. Distinct observations whose
 * posteriors coincide within L1 distance 1e-10 are the same atom of q and
 * are merged, weights added (the merged posterior is the weight-average),
 * which keeps Lévy-Prokhorov computations on q stable.
 */
struct BeliefBranchSet {
  static constexpr double kMergeTolerance = 1e-10;

  std::vector<BeliefBranch> branches;

  // q as a finite measure on the simplex with the L1 ground metric.
  FiniteMeasure as_measure() const {
    if (branches.empty()) throw DomainError("BeliefBranchSet: no branches");
    GroundMetric metric{GroundMetric::Kind::l1, branches.front().posterior.size()};
    std::vector<Point> support;
    std::vector<double> weights;
    support.reserve(branches.size());
    for (const auto& b : branches) {
      support.push_back(b.posterior.weights());
      weights.push_back(b.weight);
    }
    return FiniteMeasure(metric, std::move(support), std::move(weights));
  }
};

inline BeliefBranchSet belief_branches(const Matrix& p, const Matrix& q_obs,
                                       const Belief& z) {
  const std::vector<double> marginal = observation_marginal(p, q_obs, z);
  BeliefBranchSet out;
  for (std::size_t y = 0; y < marginal.size(); ++y) {
    if (!(marginal[y] > 0.0)) continue;
    Belief posterior = bayes_posterior(p, q_obs, z, y);
    bool merged = false;
    for (auto& branch : out.branches) {
      if (l1_distance(branch.posterior, posterior) <= BeliefBranchSet::kMergeTolerance) {
        const double total = branch.weight + marginal[y];
        std::vector<double> mix(posterior.size());
        for (std::size_t x = 0; x < mix.size(); ++x) {
          mix[x] = (branch.weight * branch.posterior[x] + marginal[y] * posterior[x]) / total;
        }
        branch.posterior = Belief(std::move(mix));
        branch.weight = total;
        merged = true;
        break;
      }
    }
    if (!merged) out.branches.push_back({y, marginal[y], std::move(posterior)});
  }
  return out;
}

// ============================================================================
// FinitePOMDP wrappers
// ============================================================================

inline const Matrix& transition_slice(const FinitePOMDP& model, std::size_t action) {
  if (action >= model.n_actions) throw DomainError("action index out of range");
  return model.transition[action];
}

inline const Matrix& observation_slice(const FinitePOMDP& model, std::size_t action) {
  if (action >= model.n_actions) throw DomainError("action index out of range");
  return model.observation[action];
}

inline double joint_R(const FinitePOMDP& model, const Belief& z, std::size_t action,
                      std::span<const std::size_t> state_set,
                      std::span<const std::size_t> obs_set) {
  return joint_probability(transition_slice(model, action),
                           observation_slice(model, action), z, state_set, obs_set);
}

// R'(.|z,a) as a FiniteMeasure over the observation indices (1-D points).
inline FiniteMeasure obs_marginal(const FinitePOMDP& model, const Belief& z,
                                  std::size_t action) {
  const std::vector<double> marginal = observation_marginal(
      transition_slice(model, action), observation_slice(model, action), z);
  std::vector<Point> support;
  std::vector<double> weights;
  for (std::size_t y = 0; y < marginal.size(); ++y) {
    support.push_back({static_cast<double>(y)});
    weights.push_back(marginal[y]);
  }
  return FiniteMeasure(GroundMetric{GroundMetric::Kind::euclidean, 1},
                       std::move(support), std::move(weights));
}

inline Belief bayes_posterior(const FinitePOMDP& model, const Belief& z,
                              std::size_t action, std::size_t y) {
  return bayes_posterior(transition_slice(model, action),
                         observation_slice(model, action), z, y);
}

inline BeliefBranchSet belief_kernel_q(const FinitePOMDP& model, const Belief& z,
                                       std::size_t action) {
  return belief_branches(transition_slice(model, action),
                         observation_slice(model, action), z);
}

// Lifted one-step cost c̄(z,a) = sum_x c(x,a) z(x). Infinite iff some state
// of positive belief mass has infinite cost; zero-mass states are a null set
// and never contribute.
inline double expected_cost(const FinitePOMDP& model, const Belief& z,
                            std::size_t action) {
  if (action >= model.n_actions) throw DomainError("action index out of range");
  if (z.size() != model.n_states) throw DomainError("expected_cost: belief size mismatch");
  KahanSum acc;
  for (std::size_t x = 0; x < model.n_states; ++x) {
    if (z[x] == 0.0) continue;
    const double c = model.cost(x, action);
    if (c == std::numeric_limits<double>::infinity()) {
      return std::numeric_limits<double>::infinity();
    }
    acc.add(c * z[x]);
  }
  return acc.value();
}

// Belief after the initial observation: z0(x) = Q0(y0|x) p(x) / normalizer.
inline Belief initial_belief(const FinitePOMDP& model, const Belief& prior,
                             std::size_t y0) {
  if (y0 >= model.n_obs) throw DomainError("initial_belief: observation index out of range");
  if (prior.size() != model.n_states) throw DomainError("initial_belief: prior size mismatch");
  std::vector<double> numer(model.n_states, 0.0);
  KahanSum norm;
  for (std::size_t x = 0; x < model.n_states; ++x) {
    numer[x] = model.initial_observation(x, y0) * prior[x];
    norm.add(numer[x]);
  }
  const double total = norm.value();
  if (!(total > 0.0)) {
    throw UnobservableEvidence("initial_belief: initial observation " +
                               std::to_string(y0) + " has probability zero");
  }
  for (double& v : numer) v /= total;
  return Belief(std::move(numer));
}

}  // namespace beliefmdp
