#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "numeric.hpp"

namespace beliefmdp {

// ============================================================================
// FinitePOMDP
// ============================================================================

// Assumption (D): cost bounded below, alpha in [0,1).
// Assumption (P): cost nonnegative, alpha in [0,1].
enum class CostAssumption { D, P };

inline std::string to_string(CostAssumption a) {
  return a == CostAssumption::D ? "D" : "P";
}

/**
 * Complete finite model (P, Q, Q0, c, alpha).
 *
 * transition[a] is the |X| x |X| state transition law, row x -> P(.|x,a).
 * observation[a] is the |X| x |Y| observation kernel, row x' -> Q(.|a,x').
 * initial_observation is the |X| x |Y| kernel Q0, row x -> Q0(.|x).
 * cost is |X| x |A|; entries may be +infinity (states priced out under an
 * action) but every state must keep at least one action of finite cost.
 */
struct FinitePOMDP {
  std::size_t n_states = 0;
  std::size_t n_obs = 0;
  std::size_t n_actions = 0;
  std::vector<Matrix> transition;
  std::vector<Matrix> observation;
  Matrix initial_observation;
  Matrix cost;
  double alpha = 0.0;
  CostAssumption assumption = CostAssumption::P;
  std::vector<std::string> state_names;
  std::vector<std::string> obs_names;
  std::vector<std::string> action_names;

  static constexpr double kStochasticTolerance = 1e-12;
};

struct Violation {
  std::string where;    // e.g. "P[a=1][x=0]"
  std::string message;  // what is wrong
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.where << ": " << v.message << "\n";
    return os.str();
  }
};

namespace detail {

inline void check_stochastic_rows(const Matrix& m, const std::string& label,
                                  std::vector<Violation>& out) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    KahanSum sum;
    bool negative = false;
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double v = m(i, j);
      if (!(v >= 0.0)) negative = true;
      sum.add(v);
    }
    std::ostringstream where;
    where << label << "[" << i << "]";
    if (negative) out.push_back({where.str(), "negative entry"});
    const double s = sum.value();
    if (!(std::fabs(s - 1.0) <= FinitePOMDP::kStochasticTolerance)) {
      std::ostringstream msg;
      msg << "row sums to " << s << " (|sum-1| > 1e-12)";
      out.push_back({where.str(), msg.str()});
    }
  }
}

}  // namespace detail

/**
 * Checks every FinitePOMDP invariant and reports each violation with index
 * coordinates. Shape inconsistencies (wrong array sizes) throw SchemaError;
 * everything else lands in the report. Empty report iff the model is valid.
 */
inline ValidationReport validate_model(const FinitePOMDP& model) {
  const std::size_t nx = model.n_states, ny = model.n_obs, na = model.n_actions;
  if (nx == 0 || ny == 0 || na == 0) {
    throw SchemaError("validate_model: state/observation/action counts must be positive");
  }
  if (model.transition.size() != na || model.observation.size() != na) {
    throw SchemaError("validate_model: kernel stacks do not match action count");
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (model.transition[a].rows != nx || model.transition[a].cols != nx) {
      throw SchemaError("validate_model: P[" + std::to_string(a) + "] has wrong shape");
    }
    if (model.observation[a].rows != nx || model.observation[a].cols != ny) {
      throw SchemaError("validate_model: Q[" + std::to_string(a) + "] has wrong shape");
    }
  }
  if (model.initial_observation.rows != nx || model.initial_observation.cols != ny) {
    throw SchemaError("validate_model: Q0 has wrong shape");
  }
  if (model.cost.rows != nx || model.cost.cols != na) {
    throw SchemaError("validate_model: cost has wrong shape");
  }

  ValidationReport report;
  for (std::size_t a = 0; a < na; ++a) {
    detail::check_stochastic_rows(model.transition[a], "P[a=" + std::to_string(a) + "]",
                                  report.violations);
    detail::check_stochastic_rows(model.observation[a], "Q[a=" + std::to_string(a) + "]",
                                  report.violations);
  }
  detail::check_stochastic_rows(model.initial_observation, "Q0", report.violations);

  for (std::size_t x = 0; x < nx; ++x) {
    bool some_finite = false;
    for (std::size_t a = 0; a < na; ++a) {
      const double c = model.cost(x, a);
      std::ostringstream where;
      where << "cost[x=" << x << "][a=" << a << "]";
      if (std::isnan(c)) {
        report.violations.push_back({where.str(), "NaN cost"});
      } else if (c == -std::numeric_limits<double>::infinity()) {
        report.violations.push_back({where.str(), "cost unbounded below (-inf)"});
      } else if (std::isfinite(c)) {
        some_finite = true;
      }
    }
    if (!some_finite) {
      report.violations.push_back(
          {"cost[x=" + std::to_string(x) + "]", "no action with finite cost"});
    }
  }

  const bool alpha_ok = model.assumption == CostAssumption::D
                            ? (model.alpha >= 0.0 && model.alpha < 1.0)
                            : (model.alpha >= 0.0 && model.alpha <= 1.0);
  if (!alpha_ok) {
    std::ostringstream msg;
    msg << "alpha = " << model.alpha << " outside the range allowed by assumption "
        << to_string(model.assumption);
    report.violations.push_back({"alpha", msg.str()});
  }
  if (model.assumption == CostAssumption::P) {
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t a = 0; a < na; ++a) {
        if (model.cost(x, a) < 0.0) {
          std::ostringstream where;
          where << "cost[x=" << x << "][a=" << a << "]";
          report.violations.push_back({where.str(), "negative cost under assumption P"});
        }
      }
    }
  }
  return report;
}

// ============================================================================
// Cost assumptions and K-inf-compactness diagnostics
// ============================================================================

struct CostCheck {
  bool holds_d = false;
  bool holds_p = false;
  double shift = 0.0;  // K = max(0, -min c): c + K is nonnegative
  std::string kinf_diagnostic;
};

/**
 * Evaluates Assumptions (D) and (P) and the cost shift K. On finite state
 * and action sets the K-inf-compactness conditions (a)/(b) hold
 * automatically (every function is continuous, every sequence accumulates),
 * so the diagnostic reports them as trivially satisfied.
 */
inline CostCheck check_cost_assumptions(const FinitePOMDP& model) {
  CostCheck out;
  double min_cost = std::numeric_limits<double>::infinity();
  bool unbounded_below = false;
  for (std::size_t x = 0; x < model.n_states; ++x) {
    for (std::size_t a = 0; a < model.n_actions; ++a) {
      const double c = model.cost(x, a);
      if (c == -std::numeric_limits<double>::infinity() || std::isnan(c)) {
        unbounded_below = true;
      } else if (c < min_cost) {
        min_cost = c;
      }
    }
  }
  out.holds_d = !unbounded_below && model.alpha >= 0.0 && model.alpha < 1.0;
  out.holds_p = !unbounded_below && min_cost >= 0.0 && model.alpha >= 0.0 &&
                model.alpha <= 1.0;
  out.shift = unbounded_below ? std::numeric_limits<double>::infinity()
                              : std::max(0.0, -min_cost);
  out.kinf_diagnostic =
      "finite X and A: conditions (a) and (b) hold trivially "
      "(all functions lower semi-continuous, all sequences accumulate)";
  return out;
}

/**
 * Sampling heuristic for condition (b) on a parametric action family over
 * A = [0,1]: draws convergent state sequences and actions with cost bounded
 * by lambda, then reports whether the action sequence accumulates. On a
 * compact interval it always does; the sampler exists to exercise the
 * diagnostic plumbing, not to decide the topological property.
 */
inline std::string kinf_sequence_diagnostic(
    const std::function<double(std::size_t, double)>& cost, std::size_t n_states,
    double lambda, Rng& rng, std::size_t samples = 256) {
  std::vector<double> accepted;
  const std::size_t x_limit = rng.next_u64() % n_states;
  for (std::size_t i = 0; i < samples; ++i) {
    const double a = rng.uniform();
    if (cost(x_limit, a) <= lambda) accepted.push_back(a);
  }
  if (accepted.size() < 2) {
    return "inconclusive: sublevel set sampled empty (lambda too small)";
  }
  std::sort(accepted.begin(), accepted.end());
  double min_gap = 1.0;
  for (std::size_t i = 0; i + 1 < accepted.size(); ++i) {
    min_gap = std::min(min_gap, accepted[i + 1] - accepted[i]);
  }
  std::ostringstream os;
  os << "sampled " << accepted.size() << " actions in the lambda-sublevel set; "
     << "minimal gap " << min_gap
     << "; bounded action sequences accumulate (A = [0,1] compact)";
  return os.str();
}

// ============================================================================
// Parametric kernel families
// ============================================================================

enum class LinkKind { linear, smoothstep, step };

inline std::string to_string(LinkKind k) {
  switch (k) {
    case LinkKind::linear: return "linear";
    case LinkKind::smoothstep: return "smoothstep";
    case LinkKind::step: return "step";
  }
  return "?";
}

/**
 * Kernel-valued curve a -> (1 - g(a)) K0 + g(a) K1 over a in [0,1].
 *
 * The linear and smoothstep links are continuous (the linear one with an
 * analytically known TV modulus, which the continuity diagnostics use as an
 * exact oracle); the step link jumps at a = 0.5 and serves as the negative
 * fixture. Convex combinations of row-stochastic matrices are row-stochastic;
 * at() re-checks the row sums after evaluation.
 */
struct ParametricKernelFamily {
  Matrix k0;
  Matrix k1;
  LinkKind link = LinkKind::linear;

  double link_value(double a) const {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw DomainError("ParametricKernelFamily: parameter outside [0,1]");
    }
    switch (link) {
      case LinkKind::linear: return a;
      case LinkKind::smoothstep: return a * a * (3.0 - 2.0 * a);
      case LinkKind::step: return a < 0.5 ? 0.0 : 1.0;
    }
    return a;
  }

  Matrix at(double a) const {
    if (k0.rows != k1.rows || k0.cols != k1.cols) {
      throw SchemaError("ParametricKernelFamily: endpoint shapes differ");
    }
    const double g = link_value(a);
    if (g == 0.0) return k0;
    if (g == 1.0) return k1;
    Matrix out(k0.rows, k0.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] = (1.0 - g) * k0.data[i] + g * k1.data[i];
    }
    for (std::size_t i = 0; i < out.rows; ++i) {
      KahanSum sum;
      for (std::size_t j = 0; j < out.cols; ++j) sum.add(out(i, j));
      if (std::fabs(sum.value() - 1.0) > FinitePOMDP::kStochasticTolerance) {
        throw DomainError("ParametricKernelFamily: evaluated row " +
                          std::to_string(i) + " is not stochastic");
      }
    }
    return out;
  }
};

inline Matrix kernel_at(const ParametricKernelFamily& family, double a) {
  return family.at(a);
}

// L1 distance between two kernel rows; equals rho_TV of the row measures on
// the shared column index set.
inline double row_tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("row_tv_distance: length mismatch");
  KahanSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(std::fabs(a[i] - b[i]));
  return acc.value();
}

}  // namespace beliefmdp
