#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "belief.hpp"
#include "errors.hpp"
#include "measures.hpp"
#include "pomdp.hpp"

namespace beliefmdp {

// ============================================================================
// Reports
// ============================================================================

enum class Verdict { decaying, non_vanishing, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::decaying: return "decaying-below-tolerance";
    case Verdict::non_vanishing: return "non-vanishing";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

/**
 * Outcome of one continuity probe: the sequence of distances modulus[n]
 * along an approach sequence, classified against a tolerance.
 *
 * "decaying" requires the final modulus below the tolerance and the running
 * max over the final third below twice the tolerance; "non-vanishing"
 * requires the final third to stay at or above twice the tolerance;
 * everything in between is "inconclusive".
 */
struct ContinuityReport {
  std::string probe;
  std::vector<double> moduli;
  Verdict verdict = Verdict::inconclusive;
  double tolerance = 1e-6;
  std::size_t horizon = 0;
};

inline Verdict classify_moduli(std::span<const double> moduli, double tolerance) {
  if (moduli.empty()) return Verdict::inconclusive;
  const std::size_t tail_start = (2 * moduli.size()) / 3;
  double tail_max = 0.0;
  double tail_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = tail_start; i < moduli.size(); ++i) {
    tail_max = std::max(tail_max, moduli[i]);
    tail_min = std::min(tail_min, moduli[i]);
  }
  if (moduli.back() < tolerance && tail_max < 2.0 * tolerance) return Verdict::decaying;
  if (tail_min >= 2.0 * tolerance) return Verdict::non_vanishing;
  return Verdict::inconclusive;
}

// ============================================================================
// Approach sequences
// ============================================================================

// a_n = a + radius * 2^{-n}, n = 1..steps (signed radius; clamped into [0,1]).
// Once the offset drops below one ulp the sequence saturates at the nearest
// representable point on the approach side instead of collapsing onto the
// target: a one-sided probe of a jump must never evaluate at the jump itself.
inline std::vector<double> geometric_action_sequence(double target, double radius,
                                                     std::size_t steps) {
  std::vector<double> out(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    double a = target + radius * std::ldexp(1.0, -static_cast<int>(n) - 1);
    if (radius != 0.0 && a == target) {
      a = std::nextafter(target, target + radius);
    }
    out[n] = std::clamp(a, 0.0, 1.0);
  }
  return out;
}

// z_n = target + 2^{-n} (start - target): TV-convergent beliefs on the simplex.
inline std::vector<Belief> geometric_belief_sequence(const Belief& target,
                                                     const Belief& start,
                                                     std::size_t steps) {
  if (target.size() != start.size()) {
    throw DomainError("geometric_belief_sequence: belief sizes differ");
  }
  std::vector<Belief> out;
  out.reserve(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = std::ldexp(1.0, -static_cast<int>(n) - 1);
    std::vector<double> w(target.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = (1.0 - t) * target[i] + t * start[i];
      total += w[i];
    }
    for (double& v : w) v /= total;  // renormalize away roundoff
    out.emplace_back(std::move(w));
  }
  return out;
}

// ============================================================================
// Parametric model for the continuity lab
// ============================================================================

/**
 * POMDP whose action set is the continuum [0,1], realized through one
 * kernel family for the transition law (|X| x |X| endpoints) and one for the
 * observation kernel (|X| x |Y| endpoints). This is the object whose weak /
 * setwise / total-variation continuity the diagnostics probe.
 */
struct ParametricPOMDP {
  std::size_t n_states = 0;
  std::size_t n_obs = 0;
  ParametricKernelFamily transition;
  ParametricKernelFamily observation;

  Matrix transition_at(double a) const { return transition.at(a); }
  Matrix observation_at(double a) const { return observation.at(a); }

  void check_shapes() const {
    if (transition.k0.rows != n_states || transition.k0.cols != n_states ||
        transition.k1.rows != n_states || transition.k1.cols != n_states) {
      throw SchemaError("ParametricPOMDP: transition endpoints must be |X| x |X|");
    }
    if (observation.k0.rows != n_states || observation.k0.cols != n_obs ||
        observation.k1.rows != n_states || observation.k1.cols != n_obs) {
      throw SchemaError("ParametricPOMDP: observation endpoints must be |X| x |Y|");
    }
  }
};

// ============================================================================
// Diagnostics
// ============================================================================

/**
 * Total-variation modulus of one kernel row along an approach sequence:
 * modulus[n] = rho_TV(K(a_n) row, K(a) row). For the linear link this equals
 * |g(a_n) - g(a)| * rho_TV(K0 row, K1 row) exactly, which the tests use as a
 * closed-form oracle.
 */
inline ContinuityReport tv_modulus_kernel(const ParametricKernelFamily& family,
                                          std::size_t row, double a,
                                          std::span<const double> a_seq,
                                          double tolerance = 1e-6) {
  if (row >= family.k0.rows) throw DomainError("tv_modulus_kernel: row out of range");
  ContinuityReport report;
  report.tolerance = tolerance;
  report.horizon = a_seq.size();
  const Matrix at_target = family.at(a);
  for (double an : a_seq) {
    const Matrix at_n = family.at(an);
    report.moduli.push_back(row_tv_distance(at_n.row(row), at_target.row(row)));
  }
  report.verdict = classify_moduli(report.moduli, tolerance);
  std::ostringstream os;
  os << "tv_modulus row=" << row << " a=" << a << " link=" << to_string(family.link);
  report.probe = os.str();
  return report;
}

namespace detail {

// Vector over y of R(B x {y} | z, a) = sum_{x' in B} Q(y|a,x') (zP)(x').
inline std::vector<double> joint_obs_vector(const Matrix& p, const Matrix& q_obs,
                                            const Belief& z,
                                            std::span<const std::size_t> state_set) {
  const std::vector<double> predicted = predicted_marginal(p, z);
  std::vector<double> out(q_obs.cols, 0.0);
  for (std::size_t y = 0; y < q_obs.cols; ++y) {
    KahanSum acc;
    for (std::size_t next : state_set) {
      if (next >= q_obs.rows) throw DomainError("joint_obs_vector: state index out of range");
      acc.add(q_obs(next, y) * predicted[next]);
    }
    out[y] = acc.value();
  }
  return out;
}

}  // namespace detail

/**
 * Equicontinuity probe of the family R_B = { (z,a) -> R(B x C | z,a) } at
 * (z,a): modulus[n] = sup over C of |R(B x C | z_n, a_n) - R(B x C | z, a)|,
 * computed through sup_set_discrepancy on the Y-marginal difference
 * restricted to B. Uniform-over-C continuity of the joint kernel at (z,a) is
 * what a decaying modulus certifies; on a finite observation set the sup is
 * exactly attainable.
 */
inline ContinuityReport equicontinuity_report(const ParametricPOMDP& model,
                                              std::span<const std::size_t> state_set,
                                              const Belief& z, double a,
                                              std::span<const Belief> z_seq,
                                              std::span<const double> a_seq,
                                              double tolerance = 1e-6) {
  if (z_seq.size() != a_seq.size()) {
    throw DomainError("equicontinuity_report: sequence lengths differ");
  }
  model.check_shapes();
  ContinuityReport report;
  report.tolerance = tolerance;
  report.horizon = a_seq.size();
  const std::vector<double> at_target = detail::joint_obs_vector(
      model.transition_at(a), model.observation_at(a), z, state_set);
  for (std::size_t n = 0; n < a_seq.size(); ++n) {
    const std::vector<double> at_n = detail::joint_obs_vector(
        model.transition_at(a_seq[n]), model.observation_at(a_seq[n]), z_seq[n], state_set);
    report.moduli.push_back(sup_set_discrepancy(at_n, at_target));
  }
  report.verdict = classify_moduli(report.moduli, tolerance);
  std::ostringstream os;
  os << "equicontinuity |B|=" << state_set.size() << " a=" << a;
  report.probe = os.str();
  return report;
}

/**
 * Weak-continuity probe of the belief transition kernel q(dz'|z,a):
 * modulus[n] = rho_LP( q(.|z_n,a_n), q(.|z,a) ) with both measures living on
 * the belief simplex under the L1 ground metric (which metrizes weak
 * convergence there). Belief convergence z_n -> z is realized in total
 * variation, which is stronger than weak, so a decaying modulus is valid
 * evidence of weak continuity along the probe.
 */
inline ContinuityReport q_weak_continuity_report(const ParametricPOMDP& model,
                                                 const Belief& z, double a,
                                                 std::span<const Belief> z_seq,
                                                 std::span<const double> a_seq,
                                                 double tolerance = 1e-6,
                                                 double lp_tolerance = 1e-9) {
  if (z_seq.size() != a_seq.size()) {
    throw DomainError("q_weak_continuity_report: sequence lengths differ");
  }
  model.check_shapes();
  ContinuityReport report;
  report.tolerance = tolerance;
  report.horizon = a_seq.size();
  const FiniteMeasure q_target =
      belief_branches(model.transition_at(a), model.observation_at(a), z).as_measure();
  for (std::size_t n = 0; n < a_seq.size(); ++n) {
    const FiniteMeasure q_n =
        belief_branches(model.transition_at(a_seq[n]), model.observation_at(a_seq[n]),
                        z_seq[n])
            .as_measure();
    report.moduli.push_back(lp_distance(q_n, q_target, lp_tolerance));
  }
  report.verdict = classify_moduli(report.moduli, tolerance);
  std::ostringstream os;
  os << "q_weak_continuity a=" << a << " P-link=" << to_string(model.transition.link)
     << " Q-link=" << to_string(model.observation.link);
  report.probe = os.str();
  return report;
}

// ============================================================================
// Proof-term decomposition
// ============================================================================

/**
 * The three-term triangle decomposition behind the equicontinuity proof,
 * evaluated at one probe point. Writing T(z, aP, aQ) for the joint mass of
 * B x C with the transition kernel at aP and the observation kernel at aQ:
 *
 *   i1 = |T(z_n, a_n, a_n) - T(z_n, a,   a_n)|   (swap a in P)
 *   i2 = |T(z_n, a,   a_n) - T(z_n, a,   a  )|   (swap a in Q)
 *   i3 = |T(z_n, a,   a  ) - T(z,   a,   a  )|   (swap z_n)
 *
 * together with the integral bounds that drive the proof:
 *
 *   bound1 = ∫ rho_TV(P(.|x,a_n), P(.|x,a)) z_n(dx)          >= i1
 *   bound2 = ∫ rho_TV(Q(.|a_n,s), Q(.|a,s)) mu_n(ds)         >= i2,
 *
 * where mu_n(.) = ∫ P(.|x,a) z_n(dx). The total difference obeys the
 * triangle inequality total <= i1 + i2 + i3.
 */
struct ProofTerms {
  double i1 = 0.0;
  double i2 = 0.0;
  double i3 = 0.0;
  double bound1 = 0.0;
  double bound2 = 0.0;
  double total_difference = 0.0;  // |R(BxC|z_n,a_n) - R(BxC|z,a)|
};

inline ProofTerms proof_term_decomposition(const ParametricPOMDP& model,
                                           const Belief& z_n, double a_n,
                                           const Belief& z, double a,
                                           std::span<const std::size_t> state_set,
                                           std::span<const std::size_t> obs_set) {
  model.check_shapes();
  const Matrix p_n = model.transition_at(a_n);
  const Matrix p = model.transition_at(a);
  const Matrix q_n = model.observation_at(a_n);
  const Matrix q = model.observation_at(a);

  const auto term = [&](const Belief& belief, const Matrix& trans, const Matrix& obs) {
    return joint_probability(trans, obs, belief, state_set, obs_set);
  };
  const double t_nn = term(z_n, p_n, q_n);
  const double t_an = term(z_n, p, q_n);
  const double t_aa = term(z_n, p, q);
  const double t_z = term(z, p, q);

  ProofTerms out;
  out.i1 = std::fabs(t_nn - t_an);
  out.i2 = std::fabs(t_an - t_aa);
  out.i3 = std::fabs(t_aa - t_z);
  out.total_difference = std::fabs(t_nn - t_z);

  KahanSum b1;
  for (std::size_t x = 0; x < z_n.size(); ++x) {
    b1.add(row_tv_distance(p_n.row(x), p.row(x)) * z_n[x]);
  }
  out.bound1 = b1.value();

  const std::vector<double> mu_n = predicted_marginal(p, z_n);
  KahanSum b2;
  for (std::size_t s = 0; s < mu_n.size(); ++s) {
    b2.add(row_tv_distance(q_n.row(s), q.row(s)) * mu_n[s]);
  }
  out.bound2 = b2.value();
  return out;
}

}  // namespace beliefmdp
