#pragma once

// JSON configuration parsing for the CLI. Parse errors name the offending
// field. Every optional field has a default, and resolved configurations can
// be re-serialized so outputs are self-describing.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetlasso/harness.hpp"

namespace hetlasso {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message), field(field) {}
  std::string field;
};

namespace detail_config {

template <class T>
T get_field(const nlohmann::json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

template <class T>
T get_required(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(key, "missing required field");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace detail_config

inline HyperParams parse_hyper_params(const nlohmann::json& j) {
  using detail_config::get_field;
  HyperParams p;
  p.alpha = get_field(j, "alpha", p.alpha);
  p.rho = get_field(j, "rho", p.rho);
  p.sigma_xi = get_field(j, "sigma_xi", p.sigma_xi);
  p.lambda = get_field(j, "lambda", p.lambda);
  p.sigma_eta_bar_sq = get_field(j, "sigma_eta_bar_sq", p.sigma_eta_bar_sq);
  return p;
}

inline nlohmann::json to_json(const HyperParams& p) {
  return {{"alpha", p.alpha},
          {"rho", p.rho},
          {"sigma_xi", p.sigma_xi},
          {"lambda", p.lambda},
          {"sigma_eta_bar_sq", p.sigma_eta_bar_sq}};
}

inline CovariateScaleModel parse_scale_model(const nlohmann::json& j) {
  using detail_config::get_field;
  const std::string type = detail_config::get_required<std::string>(j, "type");
  if (type == "constant_one") return CovariateScaleModel::constant_one();
  if (type == "uniform_unit") return CovariateScaleModel::uniform_unit();
  if (type == "lognormal")
    return CovariateScaleModel::log_normal(get_field(j, "mu_log", 0.0), get_field(j, "sigma_log", 0.5));
  if (type == "explicit")
    return CovariateScaleModel::explicit_samples(
        detail_config::get_required<std::vector<double>>(j, "samples"));
  throw ConfigError("scale_model.type", "unknown type '" + type + "'");
}

inline nlohmann::json to_json(const CovariateScaleModel& model) {
  nlohmann::json out;
  model.visit([&](const auto& m) {
    using T = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<T, CovariateScaleModel::ConstantOne>) {
      out["type"] = "constant_one";
    } else if constexpr (std::is_same_v<T, CovariateScaleModel::UniformUnit>) {
      out["type"] = "uniform_unit";
    } else if constexpr (std::is_same_v<T, CovariateScaleModel::LogNormal>) {
      out["type"] = "lognormal";
      out["mu_log"] = m.mu_log;
      out["sigma_log"] = m.sigma_log;
    } else {
      out["type"] = "explicit";
      out["samples"] = m.samples;
    }
  });
  return out;
}

inline PerturbationKind parse_scheme_kind(const std::string& name) {
  if (name == "isotropic" || name == "iso") return PerturbationKind::kIsotropic;
  if (name == "gram" || name == "gram_based") return PerturbationKind::kGramBased;
  throw ConfigError("scheme", "unknown scheme '" + name + "' (expected isotropic|gram)");
}

inline AmpConfig parse_amp_config(const nlohmann::json& j) {
  using detail_config::get_field;
  AmpConfig cfg;
  cfg.max_iter = get_field(j, "max_iter", cfg.max_iter);
  cfg.tol = get_field(j, "tol", cfg.tol);
  cfg.damping = get_field(j, "damping", cfg.damping);
  cfg.divergence_norm = get_field(j, "divergence_norm", cfg.divergence_norm);
  cfg.init_seed = get_field(j, "init_seed", cfg.init_seed);
  const std::string onsager = get_field<std::string>(j, "onsager", "scalar");
  if (onsager == "scalar") cfg.onsager = OnsagerVariant::kScalar;
  else if (onsager == "per_sample") cfg.onsager = OnsagerVariant::kPerSample;
  else if (onsager == "none") cfg.onsager = OnsagerVariant::kNone;
  else throw ConfigError("amp.onsager", "expected scalar|per_sample|none");
  cfg.check();
  return cfg;
}

inline nlohmann::json to_json(const AmpConfig& cfg) {
  const char* onsager = cfg.onsager == OnsagerVariant::kScalar ? "scalar"
                        : cfg.onsager == OnsagerVariant::kPerSample ? "per_sample" : "none";
  return {{"max_iter", cfg.max_iter},       {"tol", cfg.tol},
          {"damping", cfg.damping},         {"divergence_norm", cfg.divergence_norm},
          {"init_seed", cfg.init_seed},     {"onsager", onsager}};
}

inline IntegratorSpec parse_integrator(const nlohmann::json& j) {
  using detail_config::get_field;
  const std::string type = get_field<std::string>(j, "type", "quadrature");
  if (type == "quadrature") {
    QuadratureSpec q;
    q.scale_order = get_field(j, "scale_order", q.scale_order);
    q.scale_check_order = get_field(j, "scale_check_order", q.scale_check_order);
    q.channel_order = get_field(j, "channel_order", q.channel_order);
    q.channel_check_order = get_field(j, "channel_check_order", q.channel_check_order);
    q.rel_tol = get_field(j, "rel_tol", q.rel_tol);
    return q;
  }
  if (type == "monte_carlo") {
    MonteCarloSpec mc;
    mc.n_samples = get_field(j, "n_samples", mc.n_samples);
    mc.seed = get_field(j, "seed", mc.seed);
    mc.rel_tol = get_field(j, "rel_tol", mc.rel_tol);
    return mc;
  }
  throw ConfigError("integrator.type", "expected quadrature|monte_carlo");
}

inline nlohmann::json to_json(const IntegratorSpec& spec) {
  if (const auto* q = std::get_if<QuadratureSpec>(&spec)) {
    return {{"type", "quadrature"},
            {"scale_order", q->scale_order},
            {"scale_check_order", q->scale_check_order},
            {"channel_order", q->channel_order},
            {"channel_check_order", q->channel_check_order},
            {"rel_tol", q->rel_tol}};
  }
  const auto& mc = std::get<MonteCarloSpec>(spec);
  return {{"type", "monte_carlo"}, {"n_samples", mc.n_samples}, {"seed", mc.seed}, {"rel_tol", mc.rel_tol}};
}

inline SweepSpec parse_sweep_spec(const nlohmann::json& j) {
  using detail_config::get_field;
  SweepSpec spec;
  if (j.contains("params")) spec.params = parse_hyper_params(j.at("params"));
  if (j.contains("scale_model")) spec.scale_model = parse_scale_model(j.at("scale_model"));
  if (j.contains("schemes")) {
    spec.schemes.clear();
    for (const auto& s : detail_config::get_required<std::vector<std::string>>(j, "schemes"))
      spec.schemes.push_back(parse_scheme_kind(s));
  }
  spec.lambda_grid = get_field(j, "lambda_grid", default_log_grid());
  spec.sigma_eta_grid = get_field(j, "sigma_eta_grid", default_log_grid());
  const auto n_values = get_field<std::vector<std::int64_t>>(j, "n_values", {1000});
  spec.n_values.assign(n_values.begin(), n_values.end());
  spec.seeds = get_field<std::vector<std::uint64_t>>(j, "seeds", {1, 2, 3, 4, 5});
  spec.engines = get_field<std::vector<std::string>>(j, "engines", {"amp", "se"});
  if (j.contains("amp")) spec.amp = parse_amp_config(j.at("amp"));
  if (j.contains("se")) {
    spec.se.max_iter = get_field(j.at("se"), "max_iter", spec.se.max_iter);
    spec.se.tol = get_field(j.at("se"), "tol", spec.se.tol);
  }
  if (j.contains("oracle")) {
    spec.oracle.tol = get_field(j.at("oracle"), "tol", spec.oracle.tol);
    spec.oracle.max_iter = get_field(j.at("oracle"), "max_iter", spec.oracle.max_iter);
  }
  if (j.contains("integrator")) spec.integrator = parse_integrator(j.at("integrator"));
  spec.output_path = get_field<std::string>(j, "output", "");
  spec.check();
  return spec;
}

// Fully resolved sweep spec, defaults materialized.
inline nlohmann::json to_json(const SweepSpec& spec) {
  nlohmann::json out;
  out["schema_version"] = kCsvSchemaVersion;
  out["params"] = to_json(spec.params);
  out["scale_model"] = to_json(spec.scale_model);
  std::vector<std::string> schemes;
  for (auto k : spec.schemes) schemes.push_back(to_string(k));
  out["schemes"] = schemes;
  out["lambda_grid"] = spec.lambda_grid;
  out["sigma_eta_grid"] = spec.sigma_eta_grid;
  std::vector<std::int64_t> ns(spec.n_values.begin(), spec.n_values.end());
  out["n_values"] = ns;
  out["seeds"] = spec.seeds;
  out["engines"] = spec.engines;
  out["amp"] = to_json(spec.amp);
  out["se"] = {{"max_iter", spec.se.max_iter}, {"tol", spec.se.tol}};
  out["oracle"] = {{"tol", spec.oracle.tol}, {"max_iter", spec.oracle.max_iter}};
  out["integrator"] = to_json(spec.integrator);
  out["output"] = spec.output_path;
  return out;
}

}  // namespace hetlasso
