#pragma once

// Experiment orchestration: sweep specification, cell execution, CSV records
// and the bundled validation suite. Everything here is deterministic given
// the spec: cell seeds come from the seed list, and output rows follow the
// grid enumeration order regardless of how the work pool schedules them.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hetlasso/amp.hpp"
#include "hetlasso/instance.hpp"
#include "hetlasso/integrator.hpp"
#include "hetlasso/io.hpp"
#include "hetlasso/kernels.hpp"
#include "hetlasso/oracle.hpp"
#include "hetlasso/perturbation.hpp"
#include "hetlasso/privacy.hpp"
#include "hetlasso/state_evolution.hpp"

namespace hetlasso {

inline constexpr int kCsvSchemaVersion = 1;

// One harness cell result. The CSV column set is exactly these fields, in
// this order, preceded by the schema version.
struct RunRecord {
  std::string scheme;
  std::string scale_model;
  double lambda = 0.0;
  double sigma_eta_bar = 0.0;  // std-dev units
  std::int64_t n = 0;
  std::int64_t m = 0;
  std::uint64_t seed = 0;
  std::string engine;  // amp | se | oracle
  std::string status;  // converged | max_iter | diverged | se_unstable
  std::int64_t iterations = 0;
  double e_generalization = std::numeric_limits<double>::quiet_NaN();
  double rho_hat = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> cw_onave_kl;
  double wall_time_ms = 0.0;

  static std::vector<std::string> csv_header() {
    return {"schema_version", "scheme", "scale_model", "lambda", "sigma_eta_bar", "N", "M", "seed",
            "engine", "status", "iterations", "E_generalization", "rho_hat", "cw_onave_kl",
            "wall_time_ms"};
  }

  std::vector<std::string> csv_row() const {
    return {std::to_string(kCsvSchemaVersion),
            scheme,
            scale_model,
            format_double(lambda),
            format_double(sigma_eta_bar),
            std::to_string(n),
            std::to_string(m),
            std::to_string(seed),
            engine,
            status,
            std::to_string(iterations),
            format_double(e_generalization),
            format_double(rho_hat),
            cw_onave_kl.has_value() ? format_double(*cw_onave_kl) : std::string{},
            format_double(wall_time_ms)};
  }
};

struct SeSettings {
  int max_iter = 5000;
  double tol = 1e-10;
};

struct OracleSettings {
  double tol = 1e-10;
  int max_iter = 100000;
};

struct SweepSpec {
  HyperParams params;  // alpha, rho, sigma_xi; lambda and sigma come from grids
  CovariateScaleModel scale_model = CovariateScaleModel::uniform_unit();
  std::vector<PerturbationKind> schemes{PerturbationKind::kIsotropic, PerturbationKind::kGramBased};
  std::vector<double> lambda_grid;
  std::vector<double> sigma_eta_grid;  // std-dev units
  std::vector<Eigen::Index> n_values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> engines{"amp", "se"};
  AmpConfig amp;
  SeSettings se;
  OracleSettings oracle;
  IntegratorSpec integrator = QuadratureSpec{};
  std::string output_path;

  void check() const {
    require_valid(params);
    auto sorted = [](const std::vector<double>& g) {
      for (std::size_t i = 1; i < g.size(); ++i)
        if (g[i] < g[i - 1]) return false;
      return true;
    };
    if (lambda_grid.empty() || sigma_eta_grid.empty())
      throw std::invalid_argument("SweepSpec: grids must be nonempty");
    if (!sorted(lambda_grid) || !sorted(sigma_eta_grid))
      throw std::invalid_argument("SweepSpec: grids must be sorted ascending");
    const bool needs_instances =
        std::find(engines.begin(), engines.end(), "amp") != engines.end() ||
        std::find(engines.begin(), engines.end(), "oracle") != engines.end();
    if (needs_instances && (seeds.empty() || n_values.empty()))
      throw std::invalid_argument("SweepSpec: seeds and n_values required for amp/oracle engines");
    for (const auto& e : engines)
      if (e != "amp" && e != "se" && e != "oracle")
        throw std::invalid_argument("SweepSpec: unknown engine '" + e + "'");
    amp.check();
  }
};

// Default 20-point log grid over [1e-3, 10^0.5].
inline std::vector<double> default_log_grid() {
  std::vector<double> grid(20);
  const double lo = std::log10(1e-3), hi = 0.5;
  for (int i = 0; i < 20; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, lo + (hi - lo) * i / 19.0);
  return grid;
}

namespace detail_harness {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail_harness

// --- single-cell runners -------------------------------------------------

inline RunRecord run_amp_cell(const HyperParams& p, const CovariateScaleModel& model,
                              PerturbationKind kind, double sigma_eta_bar, Eigen::Index n,
                              std::uint64_t seed, const AmpConfig& amp_cfg) {
  detail_harness::Stopwatch clock;
  HyperParams cell = p;
  cell.sigma_eta_bar_sq = sigma_eta_bar * sigma_eta_bar;
  const PerturbationScheme scheme{kind, cell.sigma_eta_bar_sq};
  const ProblemInstance inst = generate_instance(cell, model, n, seed);
  const NoiseRealization eta = draw_eta(scheme, inst.v, seed);
  AmpConfig cfg = amp_cfg;
  cfg.init_seed = seed;
  const AmpRunResult run = amp_run(inst, eta, cell, cfg, /*record_trajectory=*/false);

  RunRecord rec;
  rec.scheme = to_string(kind);
  rec.scale_model = model.name();
  rec.lambda = cell.lambda;
  rec.sigma_eta_bar = sigma_eta_bar;
  rec.n = n;
  rec.m = inst.m();
  rec.seed = seed;
  rec.engine = "amp";
  rec.status = to_string(run.state.status);
  rec.iterations = run.state.iteration;
  rec.e_generalization = generalization_error(inst, run.state.x_hat);
  rec.rho_hat = rho_hat(run.state);
  rec.wall_time_ms = clock.ms();
  return rec;
}

inline RunRecord run_oracle_cell(const HyperParams& p, const CovariateScaleModel& model,
                                 PerturbationKind kind, double sigma_eta_bar, Eigen::Index n,
                                 std::uint64_t seed, const OracleSettings& settings) {
  detail_harness::Stopwatch clock;
  HyperParams cell = p;
  cell.sigma_eta_bar_sq = sigma_eta_bar * sigma_eta_bar;
  const PerturbationScheme scheme{kind, cell.sigma_eta_bar_sq};
  const ProblemInstance inst = generate_instance(cell, model, n, seed);
  const NoiseRealization eta = draw_eta(scheme, inst.v, seed);
  const OracleResult res = oracle_solve(inst, eta, cell.lambda, settings.tol, settings.max_iter);

  RunRecord rec;
  rec.scheme = to_string(kind);
  rec.scale_model = model.name();
  rec.lambda = cell.lambda;
  rec.sigma_eta_bar = sigma_eta_bar;
  rec.n = n;
  rec.m = inst.m();
  rec.seed = seed;
  rec.engine = "oracle";
  rec.status = res.converged ? "converged" : "max_iter";
  rec.iterations = res.iterations;
  rec.e_generalization = generalization_error(inst, res.x);
  rec.rho_hat = static_cast<double>((res.x.array() != 0.0).count()) / static_cast<double>(inst.n());
  rec.wall_time_ms = clock.ms();
  return rec;
}

inline RunRecord run_se_cell(const HyperParams& p, const CovariateScaleModel& model, PerturbationKind kind,
                             double sigma_eta_bar, const SeSettings& settings,
                             const IntegratorSpec& integrator) {
  detail_harness::Stopwatch clock;
  HyperParams cell = p;
  cell.sigma_eta_bar_sq = sigma_eta_bar * sigma_eta_bar;
  const PerturbationScheme scheme{kind, cell.sigma_eta_bar_sq};

  RunRecord rec;
  rec.scheme = to_string(kind);
  rec.scale_model = model.name();
  rec.lambda = cell.lambda;
  rec.sigma_eta_bar = sigma_eta_bar;
  rec.engine = "se";
  try {
    const SeSolution sol = se_fixed_point(cell, model, scheme, integrator, SeInit{}, settings.max_iter,
                                          settings.tol);
    rec.iterations = sol.iterations;
    rec.e_generalization = sol.E_star;
    rec.rho_hat = sol.rho_hat_se;
    if (!sol.converged) {
      rec.status = "max_iter";
    } else {
      rec.status = sol.stable ? "converged" : "se_unstable";
      rec.cw_onave_kl = cw_on_ave_kl(sol, cell, model, scheme, integrator);
    }
  } catch (const IntegrationError&) {
    rec.status = "diverged";  // expectation not evaluable at requested tolerance
  }
  rec.wall_time_ms = clock.ms();
  return rec;
}

// --- sweep ---------------------------------------------------------------

// Cell enumeration order (also the row order in the CSV):
// scheme -> lambda -> sigma_eta -> [one se row] -> n -> seed -> [amp row][oracle row].
inline std::vector<RunRecord> run_sweep(const SweepSpec& spec, int threads = 1) {
  spec.check();
  const bool with_amp = std::find(spec.engines.begin(), spec.engines.end(), "amp") != spec.engines.end();
  const bool with_se = std::find(spec.engines.begin(), spec.engines.end(), "se") != spec.engines.end();
  const bool with_oracle =
      std::find(spec.engines.begin(), spec.engines.end(), "oracle") != spec.engines.end();

  struct Cell {
    PerturbationKind kind;
    double lambda;
    double sigma;
    Eigen::Index n;       // 0 for se cells
    std::uint64_t seed;   // 0 for se cells
    std::string engine;
  };
  std::vector<Cell> cells;
  for (PerturbationKind kind : spec.schemes) {
    for (double lambda : spec.lambda_grid) {
      for (double sigma : spec.sigma_eta_grid) {
        if (with_se) cells.push_back(Cell{kind, lambda, sigma, 0, 0, "se"});
        if (with_amp || with_oracle) {
          for (Eigen::Index n : spec.n_values) {
            for (std::uint64_t seed : spec.seeds) {
              if (with_amp) cells.push_back(Cell{kind, lambda, sigma, n, seed, "amp"});
              if (with_oracle) cells.push_back(Cell{kind, lambda, sigma, n, seed, "oracle"});
            }
          }
        }
      }
    }
  }

  std::vector<RunRecord> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      HyperParams p = spec.params;
      p.lambda = c.lambda;
      if (c.engine == "se") {
        rows[i] = run_se_cell(p, spec.scale_model, c.kind, c.sigma, spec.se, spec.integrator);
      } else if (c.engine == "amp") {
        rows[i] = run_amp_cell(p, spec.scale_model, c.kind, c.sigma, c.n, c.seed, spec.amp);
      } else {
        rows[i] = run_oracle_cell(p, spec.scale_model, c.kind, c.sigma, c.n, c.seed, spec.oracle);
      }
    }
  };
  const int pool = std::max(1, threads);
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> ts;
    ts.reserve(static_cast<std::size_t>(pool));
    for (int t = 0; t < pool; ++t) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }
  return rows;
}

inline void write_records_csv(const std::string& path, const std::vector<RunRecord>& rows) {
  CsvWriter csv(path);
  csv.write_row(RunRecord::csv_header());
  for (const auto& r : rows) csv.write_row(r.csv_row());
}

// --- validation suite -----------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json out;
    out["pass"] = all_pass();
    out["checks"] = nlohmann::json::array();
    for (const auto& c : checks) out["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return out;
  }
};

// Bundled property suite on small instances: derivative correctness, budget
// conservation, solver cross-checks, AMP/oracle equivalence, trivial fixed
// points and the privacy sentinel. `quick` shrinks the sample counts.
inline ValidationReport validate_suite(bool quick = false) {
  ValidationReport report;
  auto add = [&](std::string name, bool pass, std::string detail) {
    report.checks.push_back(CheckResult{std::move(name), pass, std::move(detail)});
  };

  {  // scalar kernel pinned examples
    const bool ok = soft_mean(1.0, 2.0, 1.0) == 1.0 && soft_mean(1.0, 0.5, 1.0) == 0.0 &&
                    soft_mean(0.5, -3.0, 1.0) == -2.5 && soft_var(1.0, 2.0, 1.0) == 1.0 &&
                    soft_var(1.0, 0.5, 1.0) == 0.0 && soft_var(0.3, 0.61, 2.0) == 0.3 &&
                    std::abs(r_hat(0.0, 1.0, 1.0, 1.0) - std::erfc(1.0 / std::sqrt(2.0))) < 1e-15;
    add("kernel_examples", ok, ok ? "all pinned kernel values match" : "kernel value mismatch");
  }

  {  // analytic derivatives vs central finite differences
    Rng rng(20240311);
    double worst1 = 0.0, worst2 = 0.0;
    const int points = quick ? 40 : 100;
    for (int i = 0; i < points; ++i) {
      const double m = 4.0 * (rng.uniform01() - 0.5);
      const double sigma = 0.2 + 3.0 * rng.uniform01();
      const double lambda = 0.1 + 2.0 * rng.uniform01();
      const double seta = 0.1 + 2.0 * rng.uniform01();
      const double h = 1e-6;
      const double fd1 = (r_hat(m + h, sigma, lambda, seta) - r_hat(m - h, sigma, lambda, seta)) / (2 * h);
      const double fd2 =
          (r_hat_d1(m + h, sigma, lambda, seta) - r_hat_d1(m - h, sigma, lambda, seta)) / (2 * h);
      worst1 = std::max(worst1, std::abs(fd1 - r_hat_d1(m, sigma, lambda, seta)));
      worst2 = std::max(worst2, std::abs(fd2 - r_hat_d2(m, sigma, lambda, seta)));
    }
    const bool ok = worst1 < 1e-6 && worst2 < 1e-5;
    std::ostringstream os;
    os << "max |d1 - fd| = " << worst1 << ", max |d2 - fd| = " << worst2;
    add("derivative_finite_difference", ok, os.str());
  }

  {  // budget conservation for random scale vectors, both schemes
    Rng rng(99182);
    const int trials = quick ? 500 : 10000;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 64);
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) v[i] = std::exp(1.5 * rng.gaussian());
      const double s2 = 0.01 + rng.uniform01();
      for (PerturbationKind kind : {PerturbationKind::kIsotropic, PerturbationKind::kGramBased}) {
        const Eigen::VectorXd var = allocate_variances(PerturbationScheme{kind, s2}, v);
        const double target = static_cast<double>(n) * s2;
        worst = std::max(worst, std::abs(var.sum() - target) / target);
      }
    }
    const bool ok = worst < 1e-12;
    add("budget_conservation", ok, "max relative budget error = " + format_double(worst));
  }

  {  // proximal-gradient vs coordinate-descent oracle agreement
    double worst_gap = 0.0, worst_kkt = 0.0;
    const int cases = quick ? 2 : 6;
    for (int c = 0; c < cases; ++c) {
      HyperParams p;
      p.alpha = c % 2 == 0 ? 0.5 : 2.0;
      p.lambda = c % 3 == 0 ? 0.05 : 0.4;
      p.sigma_eta_bar_sq = 0.04 * 0.04;
      const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 80, 300 + c);
      const auto eta = draw_eta(PerturbationScheme::gram_based(p.sigma_eta_bar_sq), inst.v, 17 + c);
      const auto a = oracle_solve(inst, eta, p.lambda, 1e-11);
      const auto b = oracle_solve_cd(inst, eta, p.lambda, 1e-11);
      worst_gap = std::max(worst_gap, std::abs(a.objective - b.objective) / std::max(1.0, std::abs(a.objective)));
      worst_kkt = std::max(worst_kkt, std::max(a.kkt_residual, b.kkt_residual));
    }
    const bool ok = worst_gap < 1e-10 && worst_kkt < 1e-10;
    std::ostringstream os;
    os << "max objective gap = " << worst_gap << ", max kkt residual = " << worst_kkt;
    add("oracle_cross_check", ok, os.str());
  }

  {  // AMP fixed points minimize the perturbed objective
    double worst_gap = 0.0, worst_kkt = 0.0;
    int converged = 0;
    const int cases = quick ? 3 : 8;
    for (int c = 0; c < cases; ++c) {
      HyperParams p;
      p.alpha = c % 2 == 0 ? 0.5 : 2.0;
      p.lambda = c % 2 == 0 ? 0.5 : 1.0;
      p.sigma_eta_bar_sq = c % 3 == 0 ? 0.0 : 0.05 * 0.05;
      const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 200, 1000 + c);
      const auto eta = draw_eta(PerturbationScheme::isotropic(p.sigma_eta_bar_sq), inst.v, 55 + c);
      AmpConfig cfg;
      cfg.init_seed = 7 + static_cast<std::uint64_t>(c);
      const auto run = amp_run(inst, eta, p, cfg, false);
      if (run.state.status != AmpStatus::kConverged) continue;
      ++converged;
      const auto orc = oracle_solve(inst, eta, p.lambda, 1e-11);
      const double gap = (objective_value(inst, eta, p.lambda, run.state.x_hat) - orc.objective) /
                         std::max(1.0, std::abs(orc.objective));
      worst_gap = std::max(worst_gap, gap);
      worst_kkt = std::max(worst_kkt, kkt_residual(inst, eta, p.lambda, run.state.x_hat));
    }
    const bool ok = converged > 0 && worst_gap < 1e-6 && worst_kkt < 10.0 * AmpConfig{}.tol;
    std::ostringstream os;
    os << converged << " converged runs, max objective gap = " << worst_gap
       << ", max kkt residual = " << worst_kkt;
    add("amp_oracle_equivalence", ok, os.str());
  }

  {  // trivial fixed points and the privacy sentinel
    HyperParams p;
    p.rho = 0.0;
    p.lambda = 50.0;
    p.sigma_eta_bar_sq = 0.0;
    const auto model = CovariateScaleModel::uniform_unit();
    const PerturbationScheme scheme = PerturbationScheme::isotropic(0.0);
    const SeSolution sol = se_fixed_point(p, model, scheme, QuadratureSpec{});
    const bool se_ok = sol.converged && std::abs(sol.E_star - p.sigma_xi * p.sigma_xi) < 1e-9 &&
                       sol.V_star == 0.0 && sol.rho_hat_se == 0.0 && sol.stable;
    const double kl = cw_on_ave_kl(sol, p, model, scheme, QuadratureSpec{});
    const bool ok = se_ok && std::isinf(kl);
    add("trivial_fixed_points", ok,
        se_ok ? "E*=sigma_xi^2, V*=0, sentinel returned" : "unexpected trivial fixed point");
  }

  return report;
}

}  // namespace hetlasso
