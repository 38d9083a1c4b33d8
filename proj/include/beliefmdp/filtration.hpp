#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "belief.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "measures.hpp"
#include "numeric.hpp"
#include "pomdp.hpp"

namespace beliefmdp {

using Vec = std::vector<double>;

// ============================================================================
// Noise models
// ============================================================================

struct FiniteNoise {
  FiniteMeasure law;
};

struct GaussianNoise {
  Vec mean;
  Matrix cov;  // symmetric PSD; zero covariance collapses to the mean
};

using NoiseModel = std::variant<FiniteNoise, GaussianNoise>;

inline std::size_t noise_dim(const NoiseModel& noise) {
  if (const auto* finite = std::get_if<FiniteNoise>(&noise)) {
    return finite->law.metric().dim;
  }
  return std::get<GaussianNoise>(noise).mean.size();
}

inline Vec sample_noise(const NoiseModel& noise, Rng& rng) {
  if (const auto* finite = std::get_if<FiniteNoise>(&noise)) {
    const std::size_t i = rng.categorical(finite->law.weights());
    return finite->law.support()[i];
  }
  const auto& g = std::get<GaussianNoise>(noise);
  const Matrix l = cholesky(g.cov);
  Vec z(g.mean.size());
  for (double& v : z) v = rng.gaussian();
  Vec out = g.mean;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) out[i] += l(i, j) * z[j];
  }
  return out;
}

// ============================================================================
// Control system
// ============================================================================

/**
 * Stochastic partially observable control system
 *
 *   x_{t+1} = F(x_t, a_t, xi_t),      y_{t+1} = G(a_t, x_{t+1}, eta_{t+1}),
 *
 * with y_0 = G0(x_0, eta_0), state noise xi ~ state_noise, and observation
 * noise eta uniform on (0,1)^T. additive_state_noise declares
 * F(x,a,xi) = F(x,a,mean) + (xi - mean), which lets the discretizer compute
 * exact per-cell transition masses for Gaussian xi.
 */
struct ControlSystem {
  std::size_t state_dim = 1;       // N
  std::size_t action_dim = 1;      // M
  std::size_t obs_dim = 1;         // L
  std::size_t obs_noise_dim = 1;   // T

  std::function<Vec(const Vec&, const Vec&, const Vec&)> dynamics;         // F(x,a,xi)
  std::function<Vec(const Vec&, const Vec&, const Vec&)> observe;          // G(a,x',eta)
  std::function<Vec(const Vec&, const Vec&)> observe_initial;              // G0(x,eta)
  std::function<double(const Vec&, const Vec&)> stage_cost;                // optional

  NoiseModel state_noise = GaussianNoise{{0.0}, Matrix(1, 1)};
  NoiseModel prior = GaussianNoise{{0.0}, Matrix(1, 1)};
  bool additive_state_noise = false;
};

// Decision rule fed the observations y_0..y_t; must return an action of the
// declared dimension (PolicyError otherwise).
using ObservationPolicy = std::function<Vec(std::span<const Vec>)>;

struct TrajectoryStep {
  Vec state;        // x_t
  Vec observation;  // y_t
  Vec action;       // a_t
  double cost = 0.0;
};

/**
 * Simulates the control system for a fixed number of steps. All noise draws
 * come from one seeded stream in a documented order (x0, eta0, then per step
 * xi_t, eta_{t+1}), so trajectories are bit-reproducible per seed.
 */
inline std::vector<TrajectoryStep> simulate(const ControlSystem& system,
                                            const ObservationPolicy& policy,
                                            std::size_t steps, std::uint64_t seed) {
  if (steps < 1) throw DomainError("simulate: need at least one step");
  Rng rng(seed);
  Vec x = sample_noise(system.prior, rng);
  Vec eta(system.obs_noise_dim);
  for (double& v : eta) v = rng.uniform_open();
  Vec y = system.observe_initial(x, eta);

  std::vector<TrajectoryStep> trajectory;
  std::vector<Vec> observations{y};
  for (std::size_t t = 0; t < steps; ++t) {
    Vec action = policy(observations);
    if (action.size() != system.action_dim) {
      throw PolicyError("simulate: policy returned an action of wrong dimension at step " +
                        std::to_string(t));
    }
    for (double v : action) {
      if (!std::isfinite(v)) {
        throw PolicyError("simulate: policy returned a non-finite action at step " +
                          std::to_string(t));
      }
    }
    const double cost = system.stage_cost ? system.stage_cost(x, action) : 0.0;
    trajectory.push_back({x, y, action, cost});

    const Vec xi = sample_noise(system.state_noise, rng);
    x = system.dynamics(x, action, xi);
    for (double& v : eta) v = rng.uniform_open();
    y = system.observe(action, x, eta);
    observations.push_back(y);
  }
  return trajectory;
}

// ============================================================================
// Grids
// ============================================================================

struct Grid1D {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t cells = 1;

  double width() const { return (hi - lo) / static_cast<double>(cells); }
  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width(); }

  // Clamping snap; *escaped flags values outside [lo, hi].
  std::size_t snap(double v, bool* escaped = nullptr) const {
    if (v < lo || v > hi) {
      if (escaped) *escaped = true;
      return v < lo ? 0 : cells - 1;
    }
    const auto i = static_cast<std::size_t>((v - lo) / width());
    return i >= cells ? cells - 1 : i;
  }
};

struct TensorGrid {
  std::vector<Grid1D> axes;

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& ax : axes) n *= ax.cells;
    return n;
  }

  std::size_t flatten(std::span<const std::size_t> idx) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < axes.size(); ++d) flat = flat * axes[d].cells + idx[d];
    return flat;
  }

  std::vector<std::size_t> unflatten(std::size_t flat) const {
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t d = axes.size(); d-- > 0;) {
      idx[d] = flat % axes[d].cells;
      flat /= axes[d].cells;
    }
    return idx;
  }

  Vec center(std::size_t flat) const {
    const auto idx = unflatten(flat);
    Vec c(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) c[d] = axes[d].center(idx[d]);
    return c;
  }

  std::size_t snap(std::span<const double> v, bool* escaped = nullptr) const {
    if (v.size() != axes.size()) throw DomainError("TensorGrid: point dimension mismatch");
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) idx[d] = axes[d].snap(v[d], escaped);
    return flatten(idx);
  }
};

// ============================================================================
// Quadrature
// ============================================================================

namespace detail {

// Gauss-Hermite nodes/weights for ∫ f(u) e^{-u^2} du, weights normalized to
// sum to 1 (the sqrt(pi) folded in). Newton iteration on the recurrence.
inline std::pair<Vec, Vec> gauss_hermite(std::size_t n) {
  if (n == 0) throw DomainError("gauss_hermite: degree must be positive");
  Vec x(n), w(n);
  const double tol = 1e-14;
  double z = 0.0;
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = std::pow(M_PI, -0.25);
      double p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) <= tol) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  const double norm = std::sqrt(M_PI);
  for (double& v : w) v /= norm;
  return {x, w};
}

// Tensor midpoint nodes on (0,1)^dims, nodes_per_axis each: the observation
// noise eta is uniform there, making the midpoint rule unbiased to O(h^2).
inline std::vector<Vec> midpoint_nodes(std::size_t dims, std::size_t nodes_per_axis) {
  if (nodes_per_axis == 0) throw DomainError("midpoint_nodes: need at least one node");
  std::vector<Vec> nodes;
  std::vector<std::size_t> idx(dims, 0);
  while (true) {
    Vec node(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      node[d] = (static_cast<double>(idx[d]) + 0.5) / static_cast<double>(nodes_per_axis);
    }
    nodes.push_back(std::move(node));
    std::size_t d = dims;
    while (d-- > 0) {
      if (++idx[d] < nodes_per_axis) break;
      idx[d] = 0;
      if (d == 0) return nodes;
    }
    if (dims == 0) return nodes;
  }
}

inline bool is_diagonal(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

// Per-axis Gaussian cell masses by CDF differences; tail mass is clamped
// into the boundary cells and reported through *escape.
inline Vec gaussian_cell_masses(const Grid1D& axis, double mean, double sigma,
                                double* escape) {
  Vec masses(axis.cells, 0.0);
  if (sigma == 0.0) {
    bool escaped = false;
    masses[axis.snap(mean, &escaped)] = 1.0;
    if (escaped && escape) *escape += 1.0;
    return masses;
  }
  double below = normal_cdf((axis.lo - mean) / sigma);
  for (std::size_t i = 0; i < axis.cells; ++i) {
    const double upper_edge = i + 1 == axis.cells ? axis.hi : axis.lo + (i + 1.0) * axis.width();
    const double cdf = normal_cdf((upper_edge - mean) / sigma);
    masses[i] = std::max(cdf - below, 0.0);
    below = cdf;
  }
  const double tail_lo = normal_cdf((axis.lo - mean) / sigma);
  const double tail_hi = 1.0 - normal_cdf((axis.hi - mean) / sigma);
  masses.front() += tail_lo;
  masses.back() += tail_hi;
  if (escape) *escape += tail_lo + tail_hi;
  return masses;
}

}  // namespace detail

// ============================================================================
// Discretization to a FinitePOMDP
// ============================================================================

struct DiscretizationOptions {
  double coverage_threshold = 1e-3;  // max tolerated escaping mass per row
  std::size_t gauss_hermite_degree = 32;
  std::size_t obs_quadrature_nodes = 64;  // midpoint nodes per (0,1) axis
};

// Cell masses of a prior/noise distribution on a tensor grid. Used both by
// discretize (pushforward building blocks) and to seed the discrete filter.
inline std::vector<double> discretize_distribution(const NoiseModel& noise,
                                                   const TensorGrid& grid,
                                                   double* escape = nullptr) {
  std::vector<double> masses(grid.size(), 0.0);
  if (const auto* finite = std::get_if<FiniteNoise>(&noise)) {
    for (std::size_t i = 0; i < finite->law.size(); ++i) {
      bool escaped = false;
      masses[grid.snap(finite->law.support()[i], &escaped)] += finite->law.weights()[i];
      if (escaped && escape) *escape += finite->law.weights()[i];
    }
    return masses;
  }
  const auto& g = std::get<GaussianNoise>(noise);
  if (detail::is_diagonal(g.cov)) {
    std::vector<Vec> per_axis(grid.axes.size());
    for (std::size_t d = 0; d < grid.axes.size(); ++d) {
      per_axis[d] = detail::gaussian_cell_masses(grid.axes[d], g.mean[d],
                                                 std::sqrt(g.cov(d, d)), escape);
    }
    for (std::size_t flat = 0; flat < grid.size(); ++flat) {
      const auto idx = grid.unflatten(flat);
      double m = 1.0;
      for (std::size_t d = 0; d < idx.size(); ++d) m *= per_axis[d][idx[d]];
      masses[flat] = m;
    }
    return masses;
  }
  // correlated Gaussian: tensor Gauss-Hermite pushforward
  const auto [nodes, weights] = detail::gauss_hermite(32);
  const Matrix l = cholesky(g.cov);
  const std::size_t dims = g.mean.size();
  std::vector<std::size_t> idx(dims, 0);
  while (true) {
    Vec point = g.mean;
    double w = 1.0;
    for (std::size_t d = 0; d < dims; ++d) {
      w *= weights[idx[d]];
      for (std::size_t j = 0; j <= d; ++j) {
        point[d] += std::sqrt(2.0) * l(d, j) * nodes[idx[j]];
      }
    }
    bool escaped = false;
    masses[grid.snap(point, &escaped)] += w;
    if (escaped && escape) *escape += w;
    std::size_t d = dims;
    bool done = true;
    while (d-- > 0) {
      if (++idx[d] < nodes.size()) {
        done = false;
        break;
      }
      idx[d] = 0;
    }
    if (done) break;
  }
  return masses;
}

struct DiscretizedPOMDP {
  FinitePOMDP model;
  double max_row_escape = 0.0;  // worst clamped mass over all kernel rows
};

namespace detail {

inline void normalize_row(std::span<double> row) {
  KahanSum sum;
  for (double v : row) sum.add(v);
  const double s = sum.value();
  if (!(s > 0.0)) throw CoverageError("discretize: empty kernel row");
  for (double& v : row) v /= s;
}

}  // namespace detail

/**
 * Grid discretization of the control system: the transition law becomes
 * P[a][x][x'] = mu{ s : F(center(x), a, s) lands in cell x' }, evaluated
 * exactly for finitely supported noise, by per-cell CDF differences for
 * additive diagonal Gaussian noise, and by tensor Gauss-Hermite pushforward
 * otherwise. Observation kernels integrate eta over (0,1)^T with a tensor
 * midpoint rule. Mass outside the grids is clamped into boundary cells; if
 * any row clamps more than coverage_threshold, the grids do not cover the
 * effective support and discretize throws CoverageError with the escaping
 * mass estimate.
 */
inline DiscretizedPOMDP discretize(const ControlSystem& system, const TensorGrid& state_grid,
                                   const TensorGrid& obs_grid,
                                   const std::vector<Vec>& actions,
                                   const DiscretizationOptions& options = {}) {
  if (actions.empty()) throw DomainError("discretize: need at least one action");
  if (state_grid.axes.empty() || obs_grid.axes.empty()) {
    throw DomainError("discretize: grids need at least one axis");
  }
  for (const auto& grid : {&state_grid, &obs_grid}) {
    for (const auto& axis : grid->axes) {
      if (axis.cells == 0 || !(axis.hi > axis.lo)) {
        throw DomainError("discretize: every grid axis needs cells >= 1 and hi > lo");
      }
    }
  }
  const std::size_t nx = state_grid.size();
  const std::size_t ny = obs_grid.size();
  const std::size_t na = actions.size();

  DiscretizedPOMDP out;
  FinitePOMDP& model = out.model;
  model.n_states = nx;
  model.n_obs = ny;
  model.n_actions = na;
  model.alpha = 0.0;
  model.assumption = CostAssumption::P;
  model.cost = Matrix(nx, na, 0.0);

  double worst = 0.0;
  const auto note_row = [&](double escape, const std::string& where) {
    worst = std::max(worst, escape);
    if (escape > options.coverage_threshold) {
      std::ostringstream os;
      os << "discretize: " << where << " clamps " << escape
         << " of its mass outside the grid (threshold " << options.coverage_threshold
         << ")";
      throw CoverageError(os.str());
    }
  };
  const auto row_label = [](const char* what, std::size_t a, std::size_t x) {
    std::ostringstream os;
    os << what << " row (a=" << a << ", x=" << x << ")";
    return os.str();
  };

  const bool gaussian_state =
      std::holds_alternative<GaussianNoise>(system.state_noise);
  const bool exact_gaussian =
      gaussian_state && system.additive_state_noise &&
      detail::is_diagonal(std::get<GaussianNoise>(system.state_noise).cov);
  std::pair<Vec, Vec> gh;
  if (gaussian_state && !exact_gaussian) {
    gh = detail::gauss_hermite(options.gauss_hermite_degree);
  }

  for (std::size_t a = 0; a < na; ++a) {
    Matrix p(nx, nx, 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
      const Vec cx = state_grid.center(x);
      double escape = 0.0;
      if (const auto* finite = std::get_if<FiniteNoise>(&system.state_noise)) {
        for (std::size_t k = 0; k < finite->law.size(); ++k) {
          const Vec next = system.dynamics(cx, actions[a], finite->law.support()[k]);
          bool escaped = false;
          p(x, state_grid.snap(next, &escaped)) += finite->law.weights()[k];
          if (escaped) escape += finite->law.weights()[k];
        }
      } else if (exact_gaussian) {
        const auto& g = std::get<GaussianNoise>(system.state_noise);
        const Vec base = system.dynamics(cx, actions[a], g.mean);
        std::vector<Vec> per_axis(state_grid.axes.size());
        for (std::size_t d = 0; d < state_grid.axes.size(); ++d) {
          per_axis[d] = detail::gaussian_cell_masses(state_grid.axes[d], base[d],
                                                     std::sqrt(g.cov(d, d)), &escape);
        }
        for (std::size_t next = 0; next < nx; ++next) {
          const auto idx = state_grid.unflatten(next);
          double m = 1.0;
          for (std::size_t d = 0; d < idx.size(); ++d) m *= per_axis[d][idx[d]];
          p(x, next) = m;
        }
      } else {
        const auto& g = std::get<GaussianNoise>(system.state_noise);
        const auto& [nodes, weights] = gh;
        const Matrix l = cholesky(g.cov);
        const std::size_t dims = g.mean.size();
        std::vector<std::size_t> idx(dims, 0);
        while (true) {
          Vec xi = g.mean;
          double w = 1.0;
          for (std::size_t d = 0; d < dims; ++d) {
            w *= weights[idx[d]];
            for (std::size_t j = 0; j <= d; ++j) {
              xi[d] += std::sqrt(2.0) * l(d, j) * nodes[idx[j]];
            }
          }
          const Vec next = system.dynamics(cx, actions[a], xi);
          bool escaped = false;
          p(x, state_grid.snap(next, &escaped)) += w;
          if (escaped) escape += w;
          std::size_t d = dims;
          bool done = true;
          while (d-- > 0) {
            if (++idx[d] < nodes.size()) {
              done = false;
              break;
            }
            idx[d] = 0;
          }
          if (done) break;
        }
      }
      note_row(escape, row_label("P", a, x));
      detail::normalize_row(p.row(x));
    }
    model.transition.push_back(std::move(p));
  }

  const auto eta_nodes =
      detail::midpoint_nodes(system.obs_noise_dim, options.obs_quadrature_nodes);
  const double eta_weight = 1.0 / static_cast<double>(eta_nodes.size());

  for (std::size_t a = 0; a < na; ++a) {
    Matrix q(nx, ny, 0.0);
    for (std::size_t x = 0; x < nx; ++x) {
      const Vec cx = state_grid.center(x);
      double escape = 0.0;
      for (const Vec& eta : eta_nodes) {
        const Vec y = system.observe(actions[a], cx, eta);
        bool escaped = false;
        q(x, obs_grid.snap(y, &escaped)) += eta_weight;
        if (escaped) escape += eta_weight;
      }
      note_row(escape, row_label("Q", a, x));
      detail::normalize_row(q.row(x));
    }
    model.observation.push_back(std::move(q));
  }

  model.initial_observation = Matrix(nx, ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x) {
    const Vec cx = state_grid.center(x);
    double escape = 0.0;
    for (const Vec& eta : eta_nodes) {
      const Vec y = system.observe_initial(cx, eta);
      bool escaped = false;
      model.initial_observation(x, obs_grid.snap(y, &escaped)) += eta_weight;
      if (escaped) escape += eta_weight;
    }
    note_row(escape, "Q0 row (x=" + std::to_string(x) + ")");
    detail::normalize_row(model.initial_observation.row(x));
  }

  out.max_row_escape = worst;
  return out;
}

// ============================================================================
// Linear-Gaussian instance and the Kalman filter
// ============================================================================

/**
 * x_{t+1} = A x_t + B a_t + xi_t,  y_t = C x_t + v_t,  v_t ~ N(0, R),
 * xi_t ~ N(0, process_cov), x_0 ~ N(prior_mean, prior_cov). This instance
 * has a total-variation continuous transition law and an observation kernel
 * that does not depend on the action at all, so it sits squarely inside the
 * hypotheses the continuity lab certifies.
 */
struct LinearGaussianInstance {
  Matrix a;  // N x N
  Matrix b;  // N x M
  Matrix c;  // L x N
  Matrix process_cov;  // N x N
  Matrix obs_cov;      // L x L, positive definite (zero only in degenerate demos)
  Vec prior_mean;      // N
  Matrix prior_cov;    // N x N
};

// Realizes the instance as a ControlSystem: observation noise enters through
// uniform eta via the Gaussian quantile, y = C x' + chol(R) Phi^{-1}(eta).
inline ControlSystem make_control_system(const LinearGaussianInstance& inst) {
  ControlSystem sys;
  sys.state_dim = inst.a.rows;
  sys.action_dim = inst.b.cols;
  sys.obs_dim = inst.c.rows;
  sys.obs_noise_dim = inst.c.rows;
  const Matrix obs_chol = cholesky(inst.obs_cov);
  sys.dynamics = [inst](const Vec& x, const Vec& a, const Vec& xi) {
    Vec out = inst.a * std::span<const double>(x);
    const Vec drive = inst.b * std::span<const double>(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += drive[i] + xi[i];
    return out;
  };
  const auto observe = [inst, obs_chol](const Vec& x, const Vec& eta) {
    Vec out = inst.c * std::span<const double>(x);
    Vec v(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) v[i] = normal_quantile(eta[i]);
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) out[i] += obs_chol(i, j) * v[j];
    }
    return out;
  };
  sys.observe = [observe](const Vec&, const Vec& x, const Vec& eta) { return observe(x, eta); };
  sys.observe_initial = observe;
  sys.state_noise = GaussianNoise{Vec(inst.a.rows, 0.0), inst.process_cov};
  sys.prior = GaussianNoise{inst.prior_mean, inst.prior_cov};
  sys.additive_state_noise = true;
  return sys;
}

struct GaussianBelief {
  Vec mean;
  Matrix cov;
};

inline GaussianBelief kalman_predict(const GaussianBelief& b, const Vec& action,
                                     const LinearGaussianInstance& inst) {
  GaussianBelief out;
  out.mean = inst.a * std::span<const double>(b.mean);
  const Vec drive = inst.b * std::span<const double>(action);
  for (std::size_t i = 0; i < out.mean.size(); ++i) out.mean[i] += drive[i];
  out.cov = inst.a * b.cov * transpose(inst.a) + inst.process_cov;
  symmetrize(out.cov);
  return out;
}

// Measurement update with gain K = S^- C^T (C S^- C^T + R)^{-1}. A singular
// innovation covariance is tolerated only in the fully degenerate case where
// the gain numerator vanishes too (posterior = prediction); otherwise it is
// a NumericalError as an ill-posed update.
inline GaussianBelief kalman_update(const GaussianBelief& predicted, const Vec& y,
                                    const LinearGaussianInstance& inst) {
  const Matrix ct = transpose(inst.c);
  const Matrix pct = predicted.cov * ct;
  const Matrix s = inst.c * pct + inst.obs_cov;
  Matrix gain;
  try {
    gain = transpose(solve(s, transpose(pct)));
  } catch (const NumericalError&) {
    double numerator = 0.0;
    for (double v : pct.data) numerator = std::max(numerator, std::fabs(v));
    if (numerator <= 1e-12) return predicted;  // observation adds nothing
    throw NumericalError("kalman_update: singular innovation covariance");
  }
  GaussianBelief out;
  Vec innovation = inst.c * std::span<const double>(predicted.mean);
  for (std::size_t i = 0; i < innovation.size(); ++i) innovation[i] = y[i] - innovation[i];
  out.mean = predicted.mean;
  const Vec correction = gain * std::span<const double>(innovation);
  for (std::size_t i = 0; i < out.mean.size(); ++i) out.mean[i] += correction[i];
  out.cov = (Matrix::identity(predicted.cov.rows) - gain * inst.c) * predicted.cov;
  symmetrize(out.cov);
  return out;
}

inline GaussianBelief kalman_step(const GaussianBelief& b, const Vec& action, const Vec& y,
                                  const LinearGaussianInstance& inst) {
  return kalman_update(kalman_predict(b, action, inst), y, inst);
}

// ============================================================================
// Cross-validation: exact discrete filter vs Kalman filter
// ============================================================================

struct FilterComparisonConfig {
  double state_lo = -6.0, state_hi = 6.0;
  double obs_lo = -12.0, obs_hi = 12.0;
  std::vector<Vec> actions = {{-0.5}, {0.0}, {0.5}};  // cycled as the policy
  std::size_t obs_quadrature_nodes = 4096;
  double coverage_threshold = 1e-3;
};

struct GridComparison {
  std::size_t cells = 0;
  double sup_error = 0.0;  // sup over t and axes of |discrete mean - Kalman mean|
};

// Bundled 1-D instance for the demo command and the acceptance run.
inline LinearGaussianInstance default_demo_instance() {
  LinearGaussianInstance inst;
  inst.a = Matrix(1, 1, {0.8});
  inst.b = Matrix(1, 1, {0.5});
  inst.c = Matrix(1, 1, {1.0});
  inst.process_cov = Matrix(1, 1, {0.0625});  // sigma = 0.25
  inst.obs_cov = Matrix(1, 1, {2.25});
  inst.prior_mean = {0.0};
  inst.prior_cov = Matrix(1, 1, {0.25});
  return inst;
}

// Same dynamics with every noise source removed and the action pinned to
// zero; the trajectory stays exactly at the origin, every grid resolves it,
// and both filters agree to machine precision.
inline LinearGaussianInstance zero_noise_demo_instance() {
  LinearGaussianInstance inst = default_demo_instance();
  inst.process_cov = Matrix(1, 1, {0.0});
  inst.obs_cov = Matrix(1, 1, {0.0});
  inst.prior_cov = Matrix(1, 1, {0.0});
  return inst;
}

/**
 * Runs one simulated trajectory (fixed seed) and filters it both ways: the
 * exact discrete Bayes filter on grid discretizations of increasing
 * resolution, and the closed-form Kalman filter as the oracle. Reports the
 * sup-over-time posterior-mean discrepancy per grid size; errors shrink as
 * the grids refine.
 */
inline std::vector<GridComparison> compare_filters(const LinearGaussianInstance& inst,
                                                   std::size_t steps,
                                                   std::span<const std::size_t> grid_sizes,
                                                   std::uint64_t seed,
                                                   const FilterComparisonConfig& config = {}) {
  const ControlSystem system = make_control_system(inst);
  const std::size_t n_actions = config.actions.size();
  const ObservationPolicy policy = [&](std::span<const Vec> observations) {
    return config.actions[(observations.size() - 1) % n_actions];
  };
  const auto trajectory = simulate(system, policy, steps, seed);

  // Kalman track: update with y_0 against the prior, then predict/update.
  std::vector<Vec> kalman_means;
  GaussianBelief kb{inst.prior_mean, inst.prior_cov};
  kb = kalman_update(kb, trajectory[0].observation, inst);
  kalman_means.push_back(kb.mean);
  for (std::size_t t = 1; t < steps; ++t) {
    kb = kalman_step(kb, trajectory[t - 1].action, trajectory[t].observation, inst);
    kalman_means.push_back(kb.mean);
  }

  std::vector<GridComparison> out;
  for (std::size_t cells : grid_sizes) {
    TensorGrid state_grid, obs_grid;
    for (std::size_t d = 0; d < system.state_dim; ++d) {
      state_grid.axes.push_back({config.state_lo, config.state_hi, cells});
    }
    for (std::size_t d = 0; d < system.obs_dim; ++d) {
      obs_grid.axes.push_back({config.obs_lo, config.obs_hi, cells});
    }
    DiscretizationOptions options;
    options.obs_quadrature_nodes = config.obs_quadrature_nodes;
    options.coverage_threshold = config.coverage_threshold;
    const DiscretizedPOMDP disc = discretize(system, state_grid, obs_grid, config.actions, options);

    const std::vector<double> prior_cells = discretize_distribution(system.prior, state_grid);
    Belief z = initial_belief(disc.model, Belief(prior_cells),
                              obs_grid.snap(trajectory[0].observation));

    const auto mean_of = [&](const Belief& belief) {
      Vec m(system.state_dim, 0.0);
      for (std::size_t i = 0; i < belief.size(); ++i) {
        const Vec c = state_grid.center(i);
        for (std::size_t d = 0; d < m.size(); ++d) m[d] += belief[i] * c[d];
      }
      return m;
    };

    double sup_error = 0.0;
    const auto track_error = [&](const Belief& belief, const Vec& kalman_mean) {
      const Vec m = mean_of(belief);
      for (std::size_t d = 0; d < m.size(); ++d) {
        sup_error = std::max(sup_error, std::fabs(m[d] - kalman_mean[d]));
      }
    };
    track_error(z, kalman_means[0]);
    for (std::size_t t = 1; t < steps; ++t) {
      const std::size_t action_index = (t - 1) % n_actions;
      z = bayes_posterior(disc.model, z, action_index,
                          obs_grid.snap(trajectory[t].observation));
      track_error(z, kalman_means[t]);
    }
    out.push_back({cells, sup_error});
  }
  return out;
}

}  // namespace beliefmdp
