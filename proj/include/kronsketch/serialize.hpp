#ifndef KRONSKETCH_SERIALIZE_HPP
#define KRONSKETCH_SERIALIZE_HPP

// JSON conversions (nlohmann::json) for options, configs, results and reports.
// Readers accept partial objects on top of the defaults and reject unknown
// keys with ParameterError.

#include "kronsketch/common.hpp"
#include "kronsketch/ensemble.hpp"
#include "kronsketch/harness.hpp"
#include "kronsketch/pipelines.hpp"
#include "kronsketch/solver.hpp"
#include "kronsketch/verify.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace kronsketch {

using Json = nlohmann::json;

namespace json_detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                       const char* what) {
  if (!j.is_object()) throw ParameterError(std::string(what) + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known) throw ParameterError(std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParameterError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace json_detail

inline Json matrix_to_json(const Matrix& x) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < x.cols(); ++k) row.push_back(x(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void to_json(Json& j, const SolverOptions& o) {
  j = Json{{"tol_feas", o.tol_feas},         {"tol_obj", o.tol_obj},
           {"tol_residual", o.tol_residual}, {"max_iter", o.max_iter},
           {"rho", o.rho},                   {"adaptive_rho", o.adaptive_rho},
           {"polish", o.polish}};
}

inline void from_json(const Json& j, SolverOptions& o) {
  json_detail::check_keys(
      j, {"tol_feas", "tol_obj", "tol_residual", "max_iter", "rho", "adaptive_rho", "polish"},
      "solver options");
  json_detail::read(j, "tol_feas", o.tol_feas);
  json_detail::read(j, "tol_obj", o.tol_obj);
  json_detail::read(j, "tol_residual", o.tol_residual);
  json_detail::read(j, "max_iter", o.max_iter);
  json_detail::read(j, "rho", o.rho);
  json_detail::read(j, "adaptive_rho", o.adaptive_rho);
  json_detail::read(j, "polish", o.polish);
  o.validate();
}

// The solution matrix itself is written separately as CSV.
inline void to_json(Json& j, const RecoveryResult& r) {
  j = Json{{"objective", r.objective},   {"feas_residual", r.feas_residual},
           {"iterations", r.iterations}, {"converged", r.converged},
           {"lambda", r.lambda},         {"message", r.message}};
}

inline void to_json(Json& j, const ValueSpec& v) { j = v.to_string(); }

inline void from_json(const Json& j, ValueSpec& v) {
  if (!j.is_string()) throw ParameterError("value spec must be a string");
  v = ValueSpec::parse(j.get<std::string>());
}

inline void to_json(Json& j, const TrialConfig& c) {
  j = Json{{"p", c.p},
           {"m", c.m},
           {"d", c.d},
           {"delta", c.effective_delta()},
           {"seed", c.seed},
           {"mode", to_string(c.mode)},
           {"lambda", c.lambda},
           {"kappa", c.kappa},
           {"values", c.values},
           {"success_threshold", c.success_threshold},
           {"clip_binary", c.clip_binary},
           {"solver", c.solver}};
}

inline void from_json(const Json& j, TrialConfig& c) {
  json_detail::check_keys(j,
                          {"p", "m", "d", "delta", "seed", "mode", "lambda", "kappa", "values",
                           "success_threshold", "clip_binary", "solver"},
                          "trial config");
  json_detail::read(j, "p", c.p);
  json_detail::read(j, "m", c.m);
  json_detail::read(j, "d", c.d);
  json_detail::read(j, "delta", c.delta);
  json_detail::read(j, "seed", c.seed);
  if (j.contains("mode")) c.mode = parse_program(j.at("mode").get<std::string>());
  json_detail::read(j, "lambda", c.lambda);
  json_detail::read(j, "kappa", c.kappa);
  json_detail::read(j, "values", c.values);
  json_detail::read(j, "success_threshold", c.success_threshold);
  json_detail::read(j, "clip_binary", c.clip_binary);
  json_detail::read(j, "solver", c.solver);
  c.validate();
}

inline void to_json(Json& j, const TrialRecord& r) {
  j = Json{{"config", r.config},         {"success", r.success},
           {"linf_error", r.linf_error}, {"l1_error", r.l1_error},
           {"x_l1", r.x_l1},             {"result", r.result}};
}

inline void to_json(Json& j, const CovarianceConfig& c) {
  j = Json{{"p", c.p},
           {"d", c.d},
           {"n", c.n},
           {"m", c.m},
           {"delta", c.delta > 0 ? c.delta : default_delta(c.p)},
           {"seed", c.seed},
           {"mode", c.constrained ? "constrained" : "exact"},
           {"kappa", c.kappa},
           {"kappa_grid", c.kappa_grid},
           {"folds", c.folds},
           {"values", c.values},
           {"jaccard_threshold", c.jaccard_threshold},
           {"solver", c.solver}};
}

inline void from_json(const Json& j, CovarianceConfig& c) {
  json_detail::check_keys(j,
                          {"p", "d", "n", "m", "delta", "seed", "mode", "kappa", "kappa_grid",
                           "folds", "values", "jaccard_threshold", "solver"},
                          "covariance config");
  json_detail::read(j, "p", c.p);
  json_detail::read(j, "d", c.d);
  json_detail::read(j, "n", c.n);
  json_detail::read(j, "m", c.m);
  json_detail::read(j, "delta", c.delta);
  json_detail::read(j, "seed", c.seed);
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "exact" && mode != "constrained")
      throw ParameterError("covariance config: mode must be 'exact' or 'constrained'");
    c.constrained = mode == "constrained";
  }
  json_detail::read(j, "kappa", c.kappa);
  json_detail::read(j, "kappa_grid", c.kappa_grid);
  json_detail::read(j, "folds", c.folds);
  json_detail::read(j, "values", c.values);
  json_detail::read(j, "jaccard_threshold", c.jaccard_threshold);
  json_detail::read(j, "solver", c.solver);
  c.validate();
}

inline void to_json(Json& j, const KappaSelection& s) {
  j = Json{{"factor", s.factor},
           {"kappa", s.kappa},
           {"factors", s.factors},
           {"validation_error", s.validation_error}};
}

inline void to_json(Json& j, const CovarianceOutcome& o) {
  j = Json{{"kappa", o.kappa},
           {"relative_l1_error", o.relative_l1_error},
           {"jaccard", o.jaccard},
           {"result", o.recovery}};
  if (o.selection) j["selection"] = *o.selection;
}

inline void to_json(Json& j, const ExpansionReport& r) {
  j = Json{{"neighborhood_size", r.neighborhood_size},
           {"bound", r.bound},
           {"max_collision_outside", r.max_collision_outside},
           {"max_collision_inside", r.max_collision_inside},
           {"collision_bound", r.collision_bound},
           {"eps", r.eps},
           {"part1", r.part1},
           {"part2", r.part2},
           {"part3", r.part3},
           {"passed", r.passed()}};
}

inline void to_json(Json& j, const RipReport& r) {
  j = Json{{"ratio", r.ratio}, {"eps", r.eps}, {"lower_ok", r.lower_ok}, {"upper_ok", r.upper_ok}};
}

inline void to_json(Json& j, const NullspaceReport& r) {
  j = Json{{"max_ratio", r.max_ratio},
           {"samples", r.samples},
           {"kernel_dimension", r.kernel_dimension},
           {"max_projection_residual", r.max_projection_residual},
           {"dense", r.dense},
           {"holds", r.max_ratio < 1.0}};
}

inline void to_json(Json& j, const NoiseRow& r) {
  j = Json{{"scale", r.scale},           {"trial", r.trial},
           {"noise_l1", r.noise_l1},     {"error_l1", r.error_l1},
           {"error_linf", r.error_linf}, {"converged", r.converged}};
}

}  // namespace kronsketch

#endif  // KRONSKETCH_SERIALIZE_HPP
