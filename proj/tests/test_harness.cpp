#include <catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hetlasso/config.hpp"
#include "hetlasso/harness.hpp"
#include "hetlasso/instance.hpp"

using namespace hetlasso;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/hetlasso_test_") + name;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("csv escaping follows RFC 4180") {
  REQUIRE(csv_escape("plain") == "plain");
  REQUIRE(csv_escape("a,b") == "\"a,b\"");
  REQUIRE(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  REQUIRE(csv_escape("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("doubles round-trip through the formatter") {
  for (double x : {1.0 / 3.0, 0.1, 1e-17, 123456.789, -0.0625}) {
    REQUIRE(std::stod(format_double(x)) == x);
  }
  REQUIRE(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("csv header starts with the schema version and matches row width") {
  const auto header = RunRecord::csv_header();
  REQUIRE(header.front() == "schema_version");
  RunRecord rec;
  REQUIRE(rec.csv_row().size() == header.size());
  REQUIRE(rec.csv_row().front() == "1");
}

TEST_CASE("lognormal scale-model names are quoted in csv output") {
  RunRecord rec;
  rec.scale_model = CovariateScaleModel::log_normal(0.0, 0.5).name();
  const auto path = temp_path("quote.csv");
  {
    CsvWriter csv(path);
    csv.write_row(rec.csv_row());
  }
  const std::string content = slurp(path);
  REQUIRE(content.find("\"lognormal(0,0.5)\"") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("instance files round-trip bit-exactly") {
  HyperParams p{0.5, 0.2, 0.1, 1.0, 0.04};
  const auto inst = generate_instance(p, CovariateScaleModel::log_normal(0.0, 0.5), 40, 11);
  const auto eta = draw_eta(PerturbationScheme::gram_based(0.04), inst.v, 3);
  const auto path = temp_path("inst.bin");
  write_instance(path, inst, &eta, {{"note", "roundtrip"}});

  const auto loaded = read_instance(path);
  REQUIRE(loaded.instance.F == inst.F);
  REQUIRE(loaded.instance.y == inst.y);
  REQUIRE(loaded.instance.x0 == inst.x0);
  REQUIRE(loaded.instance.v == inst.v);
  REQUIRE(loaded.instance.sigma_xi == inst.sigma_xi);
  REQUIRE(loaded.instance.seed == inst.seed);
  REQUIRE(loaded.eta.has_value());
  REQUIRE(loaded.eta->eta == eta.eta);
  REQUIRE(loaded.eta->variances == eta.variances);
  REQUIRE(loaded.eta->scheme.kind == PerturbationKind::kGramBased);
  REQUIRE(loaded.metadata.at("note") == "roundtrip");
  std::remove(path.c_str());
}

TEST_CASE("instance reader rejects corrupted files") {
  const auto path = temp_path("bad.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE this is not an instance file";
  }
  REQUIRE_THROWS(read_instance(path));
  std::remove(path.c_str());
}

TEST_CASE("se-only sweeps run without instance generation") {
  SweepSpec spec;
  spec.params = HyperParams{0.5, 0.1, 0.1, 1.0, 0.0};
  spec.scale_model = CovariateScaleModel::uniform_unit();
  spec.lambda_grid = {0.5, 1.0};
  spec.sigma_eta_grid = {0.0, 0.05};
  spec.engines = {"se"};
  spec.n_values = {};
  spec.seeds = {};
  const auto rows = run_sweep(spec, 1);
  REQUIRE(rows.size() == 2 * 2 * 2);  // schemes x lambda x sigma
  for (const auto& r : rows) {
    REQUIRE(r.engine == "se");
    REQUIRE(r.n == 0);
    REQUIRE((r.status == "converged" || r.status == "se_unstable" || r.status == "max_iter" ||
             r.status == "diverged"));
  }
  // sentinel at zero budget
  for (const auto& r : rows)
    if (r.sigma_eta_bar == 0.0 && r.status == "converged") {
      REQUIRE(r.cw_onave_kl.has_value());
      REQUIRE(std::isinf(*r.cw_onave_kl));
    }
}

TEST_CASE("sweeps are deterministic and thread-count independent") {
  SweepSpec spec;
  spec.params = HyperParams{0.5, 0.1, 0.1, 0.3, 0.0};
  spec.scale_model = CovariateScaleModel::uniform_unit();
  spec.lambda_grid = {0.3};
  spec.sigma_eta_grid = {0.05};
  spec.engines = {"amp", "se", "oracle"};
  spec.n_values = {120};
  spec.seeds = {1, 2};
  const auto a = run_sweep(spec, 1);
  const auto b = run_sweep(spec, 3);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 2 * (1 + 2 * 2));  // schemes x (se + n x seeds x {amp, oracle})
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].engine == b[i].engine);
    REQUIRE(a[i].seed == b[i].seed);
    REQUIRE(a[i].e_generalization == b[i].e_generalization);
    REQUIRE(a[i].rho_hat == b[i].rho_hat);
    REQUIRE(a[i].iterations == b[i].iterations);
  }
  // amp and oracle agree on the estimate quality at these settings
  for (const auto& r : a)
    if (r.engine != "se") REQUIRE(r.status == "converged");
}

TEST_CASE("sweep csv files carry the fixed header") {
  SweepSpec spec;
  spec.params = HyperParams{0.5, 0.1, 0.1, 1.0, 0.0};
  spec.lambda_grid = {1.0};
  spec.sigma_eta_grid = {0.0};
  spec.engines = {"se"};
  const auto rows = run_sweep(spec, 1);
  const auto path = temp_path("sweep.csv");
  write_records_csv(path, rows);
  const std::string content = slurp(path);
  REQUIRE(content.rfind("schema_version,scheme,scale_model,lambda,sigma_eta_bar,N,M,seed,engine,"
                        "status,iterations,E_generalization,rho_hat,cw_onave_kl,wall_time_ms\r\n",
                        0) == 0);
  std::remove(path.c_str());
}

TEST_CASE("sweep spec validation catches malformed grids") {
  SweepSpec spec;
  spec.lambda_grid = {};
  spec.sigma_eta_grid = {0.1};
  REQUIRE_THROWS_AS(spec.check(), std::invalid_argument);
  spec.lambda_grid = {0.5, 0.1};
  REQUIRE_THROWS_AS(spec.check(), std::invalid_argument);
  spec.lambda_grid = {0.1, 0.5};
  spec.engines = {"amp"};
  spec.seeds = {};
  REQUIRE_THROWS_AS(spec.check(), std::invalid_argument);
  spec.seeds = {1};
  spec.n_values = {100};
  spec.engines = {"warp"};
  REQUIRE_THROWS_AS(spec.check(), std::invalid_argument);
}

TEST_CASE("config parsing reports the offending field") {
  try {
    parse_scale_model(nlohmann::json{{"not_type", 1}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(e.field == "type");
  }
  try {
    parse_scheme_kind("laplacian");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("laplacian") != std::string::npos);
  }
  REQUIRE_THROWS_AS(parse_integrator(nlohmann::json{{"type", "exact"}}), ConfigError);
  REQUIRE_THROWS_AS(parse_amp_config(nlohmann::json{{"onsager", "quantum"}}), ConfigError);
}

TEST_CASE("sweep specs materialize defaults when re-serialized") {
  const auto spec = parse_sweep_spec(nlohmann::json{
      {"params", {{"alpha", 0.5}, {"rho", 0.1}, {"sigma_xi", 0.1}}},
      {"scale_model", {{"type", "uniform_unit"}}},
      {"engines", {"se"}},
      {"lambda_grid", {0.5}},
      {"sigma_eta_grid", {0.1}},
  });
  const auto j = to_json(spec);
  REQUIRE(j.at("amp").contains("tol"));
  REQUIRE(j.at("amp").contains("onsager"));
  REQUIRE(j.at("se").contains("max_iter"));
  REQUIRE(j.at("integrator").at("type") == "quadrature");
  REQUIRE(j.at("seeds").size() == 5);  // default seed list
  // default grids are the 20-point log grid
  const auto def = parse_sweep_spec(nlohmann::json{{"engines", {"se"}}});
  REQUIRE(to_json(def).at("lambda_grid").size() == 20);
}

TEST_CASE("bundled validation suite passes") {
  const auto report = validate_suite(/*quick=*/true);
  for (const auto& c : report.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.pass);
  }
  REQUIRE(report.all_pass());
  const auto j = report.to_json();
  REQUIRE(j.at("pass") == true);
  REQUIRE(j.at("checks").size() == report.checks.size());
}
