// hetlasso command-line interface.
//
// Subcommands: generate, run-amp, run-se, privacy, sweep, validate.
// All take a JSON --config; see README.md for the schemas. Outputs are CSV
// (sweeps, trajectories) or JSON (solutions, reports).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hetlasso/config.hpp"
#include "hetlasso/harness.hpp"

namespace {

using nlohmann::json;
using namespace hetlasso;

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

struct EtaSpec {
  PerturbationScheme scheme;
  std::uint64_t seed = 0;
};

// Builds or loads the instance named by a run-amp/generate config.
LoadedInstance resolve_instance(const json& cfg, std::optional<std::uint64_t> seed_override) {
  if (cfg.contains("instance")) {
    return read_instance(cfg.at("instance").get<std::string>());
  }
  if (!cfg.contains("generate")) throw ConfigError("instance|generate", "one of the two is required");
  const json& g = cfg.at("generate");
  const HyperParams p = parse_hyper_params(g.value("params", json::object()));
  const CovariateScaleModel model =
      g.contains("scale_model") ? parse_scale_model(g.at("scale_model")) : CovariateScaleModel::uniform_unit();
  const auto n = detail_config::get_field<std::int64_t>(g, "n", 1000);
  std::uint64_t seed = detail_config::get_field<std::uint64_t>(g, "seed", 1);
  if (seed_override.has_value()) seed = *seed_override;
  LoadedInstance out;
  out.instance = generate_instance(p, model, static_cast<Eigen::Index>(n), seed);
  out.metadata = {{"scale_model", to_json(model)}, {"params", to_json(p)}, {"n", n}, {"seed", seed}};
  return out;
}

NoiseRealization resolve_eta(const json& cfg, const LoadedInstance& loaded,
                             std::optional<std::uint64_t> seed_override) {
  if (cfg.contains("sigma_eta_bar")) {
    const double sbar = cfg.at("sigma_eta_bar").get<double>();
    const PerturbationKind kind =
        parse_scheme_kind(detail_config::get_field<std::string>(cfg, "scheme", "isotropic"));
    std::uint64_t eta_seed = detail_config::get_field<std::uint64_t>(cfg, "eta_seed", loaded.instance.seed);
    if (seed_override.has_value()) eta_seed = *seed_override;
    return draw_eta(PerturbationScheme{kind, sbar * sbar}, loaded.instance.v, eta_seed);
  }
  if (loaded.eta.has_value()) return *loaded.eta;
  NoiseRealization zero;
  zero.scheme = PerturbationScheme::isotropic(0.0);
  zero.variances = Eigen::VectorXd::Zero(loaded.instance.n());
  zero.eta = Eigen::VectorXd::Zero(loaded.instance.n());
  return zero;
}

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_override) {
  const json cfg = load_config(config_path);
  json wrapper;
  wrapper["generate"] = cfg.contains("generate") ? cfg.at("generate") : cfg;
  LoadedInstance loaded = resolve_instance(wrapper, seed_override);

  std::optional<NoiseRealization> eta;
  const json& g = wrapper.at("generate");
  if (g.contains("perturbation")) {
    const json& pe = g.at("perturbation");
    const double sbar = detail_config::get_required<double>(pe, "sigma_eta_bar");
    const PerturbationKind kind =
        parse_scheme_kind(detail_config::get_field<std::string>(pe, "scheme", "isotropic"));
    const auto eta_seed = detail_config::get_field<std::uint64_t>(pe, "eta_seed", loaded.instance.seed);
    eta = draw_eta(PerturbationScheme{kind, sbar * sbar}, loaded.instance.v, eta_seed);
  }
  write_instance(out_path, loaded.instance, eta.has_value() ? &*eta : nullptr, loaded.metadata);
  std::cout << "wrote instance N=" << loaded.instance.n() << " M=" << loaded.instance.m() << " to "
            << out_path << (eta.has_value() ? " (with embedded eta)" : "") << "\n";
  return 0;
}

int cmd_run_amp(const std::string& config_path, const std::string& out_path,
                std::optional<std::uint64_t> seed_override) {
  const json cfg = load_config(config_path);
  const LoadedInstance loaded = resolve_instance(cfg, std::nullopt);
  const NoiseRealization eta = resolve_eta(cfg, loaded, seed_override);

  HyperParams p;
  if (cfg.contains("generate")) p = parse_hyper_params(cfg.at("generate").value("params", json::object()));
  p.lambda = detail_config::get_field(cfg, "lambda", p.lambda);
  p.sigma_eta_bar_sq = eta.scheme.sigma_eta_bar_sq;

  AmpConfig amp_cfg = cfg.contains("amp") ? parse_amp_config(cfg.at("amp")) : AmpConfig{};
  const AmpRunResult run = amp_run(loaded.instance, eta, p, amp_cfg);

  json summary;
  summary["status"] = to_string(run.state.status);
  summary["iterations"] = run.state.iteration;
  summary["rho_hat"] = rho_hat(run.state);
  summary["E_generalization"] = generalization_error(loaded.instance, run.state.x_hat);
  summary["objective"] = objective_value(loaded.instance, eta, p.lambda, run.state.x_hat);
  summary["kkt_residual"] = kkt_residual(loaded.instance, eta, p.lambda, run.state.x_hat);
  summary["lambda"] = p.lambda;
  summary["damped"] = amp_cfg.damping > 0.0;
  std::cout << summary.dump(2) << "\n";

  if (!out_path.empty()) {
    CsvWriter csv(out_path);
    csv.write_row({"iteration", "mse_x0", "rho_hat", "s_theta", "max_change"});
    for (const auto& pt : run.trajectory)
      csv.write_row({std::to_string(pt.iteration), format_double(pt.mse_x0), format_double(pt.rho_hat),
                     format_double(pt.s_theta), format_double(pt.max_change)});
  }
  return run.state.status == AmpStatus::kConverged ? 0 : 2;
}

struct SeCellConfig {
  HyperParams params;
  CovariateScaleModel model = CovariateScaleModel::uniform_unit();
  PerturbationKind kind = PerturbationKind::kIsotropic;
  double sigma_eta_bar = 0.0;
  SeSettings settings;
  IntegratorSpec integrator = QuadratureSpec{};
};

SeCellConfig parse_se_cell(const json& cfg, std::optional<std::uint64_t> seed_override) {
  SeCellConfig out;
  out.params = parse_hyper_params(cfg.value("params", json::object()));
  if (cfg.contains("scale_model")) out.model = parse_scale_model(cfg.at("scale_model"));
  out.kind = parse_scheme_kind(detail_config::get_field<std::string>(cfg, "scheme", "isotropic"));
  out.sigma_eta_bar = detail_config::get_field(cfg, "sigma_eta_bar", 0.0);
  if (cfg.contains("se")) {
    out.settings.max_iter = detail_config::get_field(cfg.at("se"), "max_iter", out.settings.max_iter);
    out.settings.tol = detail_config::get_field(cfg.at("se"), "tol", out.settings.tol);
  }
  if (cfg.contains("integrator")) out.integrator = parse_integrator(cfg.at("integrator"));
  if (seed_override.has_value()) {
    if (auto* mc = std::get_if<MonteCarloSpec>(&out.integrator)) mc->seed = *seed_override;
  }
  out.params.sigma_eta_bar_sq = out.sigma_eta_bar * out.sigma_eta_bar;
  return out;
}

int cmd_run_se(const std::string& config_path, const std::string& out_path,
               std::optional<std::uint64_t> seed_override) {
  const SeCellConfig cell = parse_se_cell(load_config(config_path), seed_override);
  const PerturbationScheme scheme{cell.kind, cell.params.sigma_eta_bar_sq};
  json out;
  try {
    const SeSolution sol = se_fixed_point(cell.params, cell.model, scheme, cell.integrator, SeInit{},
                                          cell.settings.max_iter, cell.settings.tol);
    out["E_star"] = sol.E_star;
    out["V_star"] = sol.V_star;
    out["rho_hat_se"] = sol.rho_hat_se;
    out["stable"] = sol.stable;
    out["converged"] = sol.converged;
    out["iterations"] = sol.iterations;
    out["integrator"] = sol.integrator;
    std::cout << "E_star = " << format_double(sol.E_star) << "\n"
              << "V_star = " << format_double(sol.V_star) << "\n"
              << "rho_hat_se = " << format_double(sol.rho_hat_se) << "\n"
              << "stable = " << (sol.stable ? "true" : "false")
              << ", converged = " << (sol.converged ? "true" : "false") << "\n";
  } catch (const IntegrationError& e) {
    out["error"] = e.what();
    std::cout << "integration failure: " << e.what() << "\n";
    if (!out_path.empty()) write_json(out_path, out);
    return 3;
  }
  if (!out_path.empty()) write_json(out_path, out);
  return 0;
}

int cmd_privacy(const std::string& config_path, const std::string& out_path,
                std::optional<std::uint64_t> seed_override) {
  const SeCellConfig cell = parse_se_cell(load_config(config_path), seed_override);
  const PerturbationScheme scheme{cell.kind, cell.params.sigma_eta_bar_sq};
  json out;
  try {
    const SeSolution sol = se_fixed_point(cell.params, cell.model, scheme, cell.integrator, SeInit{},
                                          cell.settings.max_iter, cell.settings.tol);
    out["E_star"] = sol.E_star;
    out["rho_hat_se"] = sol.rho_hat_se;
    out["converged"] = sol.converged;
    if (!sol.converged) {
      std::cout << "state evolution did not converge; no metric value\n";
      if (!out_path.empty()) write_json(out_path, out);
      return 2;
    }
    const double kl = cw_on_ave_kl(sol, cell.params, cell.model, scheme, cell.integrator);
    out["cw_onave_kl"] = std::isinf(kl) ? json("inf") : json(kl);
    std::cout << "E_star = " << format_double(sol.E_star) << "\n"
              << "cwOnAveKL = " << format_double(kl)
              << (std::isinf(kl) ? "  (diverges: zero perturbation budget)" : "") << "\n";
  } catch (const IntegrationError& e) {
    out["error"] = e.what();
    std::cout << "integration failure: " << e.what() << "\n";
    if (!out_path.empty()) write_json(out_path, out);
    return 3;
  }
  if (!out_path.empty()) write_json(out_path, out);
  return 0;
}

int cmd_sweep(const std::string& config_path, std::string out_path, int threads) {
  const json cfg = load_config(config_path);
  SweepSpec spec = parse_sweep_spec(cfg);
  if (!out_path.empty()) spec.output_path = out_path;
  if (spec.output_path.empty()) throw ConfigError("output", "no output path (config 'output' or --out)");

  const auto rows = run_sweep(spec, threads);
  write_records_csv(spec.output_path, rows);
  write_json(spec.output_path + ".config.json", to_json(spec));
  std::size_t converged = 0;
  for (const auto& r : rows) converged += r.status == "converged" ? 1 : 0;
  std::cout << "wrote " << rows.size() << " rows (" << converged << " converged) to " << spec.output_path
            << "\n";
  return 0;
}

int cmd_validate(const std::string& out_path, bool quick) {
  const ValidationReport report = validate_suite(quick);
  for (const auto& c : report.checks)
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
  if (!out_path.empty()) write_json(out_path, report.to_json());
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private LASSO with heterogeneous covariate scales: AMP, state evolution, privacy metrics"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  int threads = 1;
  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed_value = 0;
  bool quick = false;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* copt = sub->add_option("--config", config_path, "JSON configuration file");
    if (needs_config) copt->required();
    sub->add_option("--out", out_path, "output path");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_option("--seed", seed_value, "seed override")->each([&](const std::string&) {
      seed_override = seed_value;
    });
  };

  auto* generate = app.add_subcommand("generate", "generate a problem instance file");
  add_common(generate, true);
  auto* run_amp = app.add_subcommand("run-amp", "run AMP on an instance");
  add_common(run_amp, true);
  auto* run_se = app.add_subcommand("run-se", "solve the state-evolution fixed point");
  add_common(run_se, true);
  auto* privacy = app.add_subcommand("privacy", "state evolution plus the cwOnAveKL metric");
  add_common(privacy, true);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep to CSV");
  add_common(sweep, true);
  auto* validate = app.add_subcommand("validate", "run the bundled validation suite");
  add_common(validate, false);
  validate->add_flag("--quick", quick, "reduced sample counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      if (out_path.empty()) throw std::runtime_error("generate requires --out");
      return cmd_generate(config_path, out_path, seed_override);
    }
    if (run_amp->parsed()) return cmd_run_amp(config_path, out_path, seed_override);
    if (run_se->parsed()) return cmd_run_se(config_path, out_path, seed_override);
    if (privacy->parsed()) return cmd_privacy(config_path, out_path, seed_override);
    if (sweep->parsed()) return cmd_sweep(config_path, out_path, threads);
    if (validate->parsed()) return cmd_validate(out_path, quick);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
