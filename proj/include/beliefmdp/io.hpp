#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "continuity.hpp"
#include "errors.hpp"
#include "filtration.hpp"
#include "measures.hpp"
#include "pomdp.hpp"

namespace beliefmdp {

using Json = nlohmann::json;

// ============================================================================
// Primitives
// ============================================================================

// %.17g keeps doubles round-trippable and CSV output byte-stable.
inline std::string format_double(double v) {
  if (v == std::numeric_limits<double>::infinity()) return "inf";
  if (v == -std::numeric_limits<double>::infinity()) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline Json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw SchemaError("malformed JSON in " + path + ": " + e.what());
  }
}

// Cost entries allow an explicit +infinity marker ("inf" or null).
inline double cost_entry_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw SchemaError("cost entry must be a number or \"inf\"");
}

inline Json cost_entry_to_json(double v) {
  if (v == std::numeric_limits<double>::infinity()) return "inf";
  if (v == -std::numeric_limits<double>::infinity()) return "-inf";
  return v;
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw SchemaError(what + ": expected a 2-D array");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw SchemaError(what + ": ragged rows");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw SchemaError(what + ": non-numeric entry");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// "states"/"observations"/"actions" may be a count or a list of names.
inline std::size_t axis_from_json(const Json& j, const std::string& what,
                                  std::vector<std::string>& names) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const auto n = j.get<long long>();
    if (n <= 0) throw SchemaError(what + ": count must be positive");
    return static_cast<std::size_t>(n);
  }
  if (j.is_array()) {
    for (const auto& name : j) {
      if (!name.is_string()) throw SchemaError(what + ": names must be strings");
      names.push_back(name.get<std::string>());
    }
    if (names.empty()) throw SchemaError(what + ": empty name list");
    return names.size();
  }
  throw SchemaError(what + ": expected a count or a list of names");
}

// Rows off by at most 1e-9 are renormalized (decimal text files drift);
// anything worse is left for validate_model to flag.
inline void renormalize_rows(Matrix& m, const std::string& label,
                             std::vector<std::string>* warnings) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    KahanSum sum;
    bool nonneg = true;
    for (std::size_t j = 0; j < m.cols; ++j) {
      sum.add(m(i, j));
      nonneg = nonneg && m(i, j) >= 0.0;
    }
    const double s = sum.value();
    const double err = std::fabs(s - 1.0);
    if (nonneg && err > FinitePOMDP::kStochasticTolerance && err <= 1e-9) {
      for (std::size_t j = 0; j < m.cols; ++j) m(i, j) /= s;
      if (warnings) {
        std::ostringstream os;
        os << label << "[" << i << "]: row sum off by " << err << "; renormalized";
        warnings->push_back(os.str());
      }
    }
  }
}

}  // namespace detail

// ============================================================================
// Model files
// ============================================================================

inline FinitePOMDP model_from_json(const Json& j,
                                   std::vector<std::string>* warnings = nullptr) {
  FinitePOMDP model;
  try {
    model.n_states = detail::axis_from_json(j.at("states"), "states", model.state_names);
    model.n_obs = detail::axis_from_json(j.at("observations"), "observations", model.obs_names);
    model.n_actions = detail::axis_from_json(j.at("actions"), "actions", model.action_names);

    const Json& p = j.at("P");
    const Json& q = j.at("Q");
    if (!p.is_array() || p.size() != model.n_actions) {
      throw SchemaError("P: expected one matrix per action");
    }
    if (!q.is_array() || q.size() != model.n_actions) {
      throw SchemaError("Q: expected one matrix per action");
    }
    for (std::size_t a = 0; a < model.n_actions; ++a) {
      model.transition.push_back(detail::matrix_from_json(p[a], "P[" + std::to_string(a) + "]"));
      model.observation.push_back(detail::matrix_from_json(q[a], "Q[" + std::to_string(a) + "]"));
    }
    model.initial_observation = detail::matrix_from_json(j.at("Q0"), "Q0");

    const Json& cost = j.at("cost");
    if (!cost.is_array() || cost.empty()) throw SchemaError("cost: expected a 2-D array");
    model.cost = Matrix(cost.size(), cost[0].size());
    for (std::size_t x = 0; x < cost.size(); ++x) {
      if (!cost[x].is_array() || cost[x].size() != model.cost.cols) {
        throw SchemaError("cost: ragged rows");
      }
      for (std::size_t a = 0; a < model.cost.cols; ++a) {
        model.cost(x, a) = detail::cost_entry_from_json(cost[x][a]);
      }
    }

    if (!j.at("alpha").is_number()) throw SchemaError("alpha: expected a number");
    model.alpha = j.at("alpha").get<double>();
    const std::string assumption = j.at("assumption").get<std::string>();
    if (assumption == "D") {
      model.assumption = CostAssumption::D;
    } else if (assumption == "P") {
      model.assumption = CostAssumption::P;
    } else {
      throw SchemaError("assumption: expected \"D\" or \"P\"");
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }

  for (std::size_t a = 0; a < model.n_actions; ++a) {
    detail::renormalize_rows(model.transition[a], "P[a=" + std::to_string(a) + "]", warnings);
    detail::renormalize_rows(model.observation[a], "Q[a=" + std::to_string(a) + "]", warnings);
  }
  detail::renormalize_rows(model.initial_observation, "Q0", warnings);
  return model;
}

inline Json model_to_json(const FinitePOMDP& model) {
  Json j;
  j["states"] = model.state_names.empty() ? Json(model.n_states) : Json(model.state_names);
  j["observations"] = model.obs_names.empty() ? Json(model.n_obs) : Json(model.obs_names);
  j["actions"] = model.action_names.empty() ? Json(model.n_actions) : Json(model.action_names);
  j["P"] = Json::array();
  j["Q"] = Json::array();
  for (std::size_t a = 0; a < model.n_actions; ++a) {
    j["P"].push_back(detail::matrix_to_json(model.transition[a]));
    j["Q"].push_back(detail::matrix_to_json(model.observation[a]));
  }
  j["Q0"] = detail::matrix_to_json(model.initial_observation);
  Json cost = Json::array();
  for (std::size_t x = 0; x < model.cost.rows; ++x) {
    Json row = Json::array();
    for (std::size_t a = 0; a < model.cost.cols; ++a) {
      row.push_back(detail::cost_entry_to_json(model.cost(x, a)));
    }
    cost.push_back(std::move(row));
  }
  j["cost"] = std::move(cost);
  j["alpha"] = model.alpha;
  j["assumption"] = to_string(model.assumption);
  return j;
}

inline FinitePOMDP load_model(const std::string& path,
                              std::vector<std::string>* warnings = nullptr) {
  return model_from_json(detail::parse_file(path), warnings);
}

inline void save_model(const FinitePOMDP& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write file: " + path);
  out << model_to_json(model).dump(2) << "\n";
}

// ============================================================================
// Parametric families
// ============================================================================

inline ParametricKernelFamily family_from_json(const Json& j, const std::string& what) {
  ParametricKernelFamily family;
  try {
    family.k0 = detail::matrix_from_json(j.at("K0"), what + ".K0");
    family.k1 = detail::matrix_from_json(j.at("K1"), what + ".K1");
    const std::string link = j.at("link").get<std::string>();
    if (link == "linear") {
      family.link = LinkKind::linear;
    } else if (link == "smoothstep") {
      family.link = LinkKind::smoothstep;
    } else if (link == "step") {
      family.link = LinkKind::step;
    } else {
      throw SchemaError(what + ".link: expected linear|smoothstep|step");
    }
  } catch (const Json::exception& e) {
    throw SchemaError(what + ": " + e.what());
  }
  return family;
}

inline Json family_to_json(const ParametricKernelFamily& family) {
  Json j;
  j["K0"] = detail::matrix_to_json(family.k0);
  j["K1"] = detail::matrix_to_json(family.k1);
  j["link"] = to_string(family.link);
  return j;
}

inline ParametricPOMDP parametric_model_from_json(const Json& j) {
  ParametricPOMDP model;
  try {
    std::vector<std::string> ignored;
    model.n_states = detail::axis_from_json(j.at("states"), "states", ignored);
    ignored.clear();
    model.n_obs = detail::axis_from_json(j.at("observations"), "observations", ignored);
    model.transition = family_from_json(j.at("P"), "P");
    model.observation = family_from_json(j.at("Q"), "Q");
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("family file: ") + e.what());
  }
  model.check_shapes();
  return model;
}

inline ParametricPOMDP load_parametric_model(const std::string& path) {
  return parametric_model_from_json(detail::parse_file(path));
}

inline void save_parametric_model(const ParametricPOMDP& model, const std::string& path) {
  Json j;
  j["states"] = model.n_states;
  j["observations"] = model.n_obs;
  j["P"] = family_to_json(model.transition);
  j["Q"] = family_to_json(model.observation);
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

// ============================================================================
// Measures
// ============================================================================

inline FiniteMeasure measure_from_json(const Json& j) {
  try {
    GroundMetric metric;
    if (j.contains("metric")) {
      const std::string kind = j.at("metric").get<std::string>();
      if (kind == "euclidean") {
        metric.kind = GroundMetric::Kind::euclidean;
      } else if (kind == "l1") {
        metric.kind = GroundMetric::Kind::l1;
      } else {
        throw SchemaError("measure.metric: expected euclidean|l1");
      }
    }
    std::vector<Point> support;
    for (const auto& p : j.at("support")) {
      support.push_back(p.get<Point>());
    }
    if (support.empty()) throw SchemaError("measure.support: empty");
    metric.dim = support.front().size();
    auto weights = j.at("weights").get<std::vector<double>>();
    return FiniteMeasure(metric, std::move(support), std::move(weights));
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("measure: ") + e.what());
  }
}

inline Json measure_to_json(const FiniteMeasure& mu) {
  Json j;
  j["support"] = mu.support();
  j["weights"] = mu.weights();
  j["metric"] = mu.metric().kind == GroundMetric::Kind::euclidean ? "euclidean" : "l1";
  return j;
}

// ============================================================================
// Linear-Gaussian instances
// ============================================================================

inline LinearGaussianInstance instance_from_json(const Json& j) {
  LinearGaussianInstance inst;
  try {
    inst.a = detail::matrix_from_json(j.at("A"), "A");
    inst.b = detail::matrix_from_json(j.at("B"), "B");
    inst.c = detail::matrix_from_json(j.at("C"), "C");
    inst.process_cov = detail::matrix_from_json(j.at("process_cov"), "process_cov");
    inst.obs_cov = detail::matrix_from_json(j.at("obs_cov"), "obs_cov");
    inst.prior_mean = j.at("prior_mean").get<Vec>();
    inst.prior_cov = detail::matrix_from_json(j.at("prior_cov"), "prior_cov");
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("instance file: ") + e.what());
  }
  return inst;
}

inline Json instance_to_json(const LinearGaussianInstance& inst) {
  Json j;
  j["A"] = detail::matrix_to_json(inst.a);
  j["B"] = detail::matrix_to_json(inst.b);
  j["C"] = detail::matrix_to_json(inst.c);
  j["process_cov"] = detail::matrix_to_json(inst.process_cov);
  j["obs_cov"] = detail::matrix_to_json(inst.obs_cov);
  j["prior_mean"] = inst.prior_mean;
  j["prior_cov"] = detail::matrix_to_json(inst.prior_cov);
  return j;
}

inline LinearGaussianInstance load_instance(const std::string& path) {
  return instance_from_json(detail::parse_file(path));
}

// ============================================================================
// Probe suites
// ============================================================================

struct Probe {
  enum class Kind { tv_modulus, equicontinuity, q_weak, proof_terms };

  Kind kind = Kind::tv_modulus;
  std::string kernel = "Q";             // tv_modulus: "P" or "Q"
  std::size_t row = 0;                  // tv_modulus: kernel row
  double a = 0.0;                       // target action
  double a_radius = 0.0;                // a_n = a + radius * 2^{-n}; 0 keeps a fixed
  std::vector<double> z;                // target belief (empty -> uniform)
  std::vector<double> z_start;          // start of the belief sequence (empty -> constant)
  std::vector<std::size_t> state_set;   // B for equicontinuity / proof_terms
  std::vector<std::size_t> obs_set;     // C for proof_terms
};

struct ProbeSuite {
  double tolerance = 1e-6;
  std::size_t horizon = 64;
  std::vector<Probe> probes;
};

inline std::string to_string(Probe::Kind k) {
  switch (k) {
    case Probe::Kind::tv_modulus: return "tv_modulus";
    case Probe::Kind::equicontinuity: return "equicontinuity";
    case Probe::Kind::q_weak: return "q_weak";
    case Probe::Kind::proof_terms: return "proof_terms";
  }
  return "?";
}

inline ProbeSuite probes_from_json(const Json& j) {
  ProbeSuite suite;
  try {
    if (j.contains("tolerance")) suite.tolerance = j.at("tolerance").get<double>();
    if (j.contains("horizon")) suite.horizon = j.at("horizon").get<std::size_t>();
    if (!(suite.tolerance > 0.0)) throw SchemaError("probes: tolerance must be positive");
    if (suite.horizon == 0) throw SchemaError("probes: horizon must be positive");
    for (const auto& p : j.at("probes")) {
      Probe probe;
      const std::string kind = p.at("kind").get<std::string>();
      if (kind == "tv_modulus") {
        probe.kind = Probe::Kind::tv_modulus;
      } else if (kind == "equicontinuity") {
        probe.kind = Probe::Kind::equicontinuity;
      } else if (kind == "q_weak") {
        probe.kind = Probe::Kind::q_weak;
      } else if (kind == "proof_terms") {
        probe.kind = Probe::Kind::proof_terms;
      } else {
        throw SchemaError("probes: unknown kind \"" + kind + "\"");
      }
      if (p.contains("kernel")) probe.kernel = p.at("kernel").get<std::string>();
      if (probe.kernel != "P" && probe.kernel != "Q") {
        throw SchemaError("probes: kernel must be \"P\" or \"Q\"");
      }
      if (p.contains("row")) probe.row = p.at("row").get<std::size_t>();
      probe.a = p.at("a").get<double>();
      if (p.contains("a_radius")) probe.a_radius = p.at("a_radius").get<double>();
      if (p.contains("z")) probe.z = p.at("z").get<std::vector<double>>();
      if (p.contains("z_start")) probe.z_start = p.at("z_start").get<std::vector<double>>();
      if (p.contains("B")) probe.state_set = p.at("B").get<std::vector<std::size_t>>();
      if (p.contains("C")) probe.obs_set = p.at("C").get<std::vector<std::size_t>>();
      suite.probes.push_back(std::move(probe));
    }
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("probe file: ") + e.what());
  }
  return suite;
}

inline ProbeSuite load_probes(const std::string& path) {
  return probes_from_json(detail::parse_file(path));
}

}  // namespace beliefmdp
