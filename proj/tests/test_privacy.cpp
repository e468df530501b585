#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "hetlasso/privacy.hpp"

using namespace hetlasso;

namespace {

SeSolution solve(const HyperParams& p, const CovariateScaleModel& model,
                 const PerturbationScheme& scheme) {
  return se_fixed_point(p, model, scheme, QuadratureSpec{});
}

}  // namespace

TEST_CASE("zero perturbation budget returns the divergence sentinel") {
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.0};
  const auto model = CovariateScaleModel::uniform_unit();
  const auto scheme = PerturbationScheme::isotropic(0.0);
  const auto sol = solve(p, model, scheme);
  REQUIRE(sol.converged);
  const double kl = cw_on_ave_kl(sol, p, model, scheme, QuadratureSpec{});
  REQUIRE(std::isinf(kl));
  REQUIRE(kl > 0.0);
}

TEST_CASE("metric requires a converged solution") {
  SeSolution sol;
  sol.converged = false;
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.01};
  REQUIRE_THROWS_AS(cw_on_ave_kl(sol, p, CovariateScaleModel::uniform_unit(),
                                 PerturbationScheme::isotropic(0.01), QuadratureSpec{}),
                    std::invalid_argument);
}

TEST_CASE("metric is finite and nonnegative at a reference point") {
  HyperParams p{0.5, 0.1, 0.1, 0.5, 0.01};
  const auto model = CovariateScaleModel::uniform_unit();
  const auto scheme = PerturbationScheme::gram_based(0.01);
  const auto sol = solve(p, model, scheme);
  REQUIRE(sol.converged);
  const double kl = cw_on_ave_kl(sol, p, model, scheme, QuadratureSpec{});
  REQUIRE(std::isfinite(kl));
  REQUIRE(kl >= 0.0);
}

TEST_CASE("schemes give identical metric values on constant scales") {
  HyperParams p{0.5, 0.1, 0.1, 0.5, 0.04};
  const auto model = CovariateScaleModel::constant_one();
  const auto iso_scheme = PerturbationScheme::isotropic(0.04);
  const auto gram_scheme = PerturbationScheme::gram_based(0.04);
  const auto iso_sol = solve(p, model, iso_scheme);
  const auto gram_sol = solve(p, model, gram_scheme);
  REQUIRE(cw_on_ave_kl(iso_sol, p, model, iso_scheme, QuadratureSpec{}) ==
          cw_on_ave_kl(gram_sol, p, model, gram_scheme, QuadratureSpec{}));
}

TEST_CASE("quadrature agrees with a Monte-Carlo evaluation of the expectation") {
  HyperParams p{0.5, 0.1, 0.1, 0.5, 0.04};
  const auto model = CovariateScaleModel::log_normal(0.0, 0.5);
  const auto scheme = PerturbationScheme::gram_based(0.04);
  const auto sol = solve(p, model, scheme);
  REQUIRE(sol.converged);

  const double quad = privacy_expectation(sol.E_star, sol.V_star, p, model, scheme, QuadratureSpec{});
  MonteCarloSpec mc;
  mc.n_samples = 4000000;
  mc.seed = 23;
  double mc_err = 0.0;
  const double sampled = privacy_expectation(sol.E_star, sol.V_star, p, model, scheme, mc, &mc_err);
  REQUIRE(std::abs(quad - sampled) < 3.0 * mc_err * std::abs(sampled) + 1e-12);
}

TEST_CASE("metric increases as the budget shrinks below the trade-off minimum") {
  // The z-integrand develops an unresolvable boundary layer as sigma -> 0
  // (where the metric diverges); this grid stays in the resolvable range
  // below the trade-off minimum (~0.07 for this cell).
  HyperParams p{0.5, 0.1, 0.1, 0.5, 0.0};
  const auto model = CovariateScaleModel::uniform_unit();
  const std::vector<double> grid{0.02, 0.026, 0.034, 0.045, 0.058};
  // The smallest cells sit at ~1e-3 quadrature accuracy while successive KL
  // values differ by 30% and more; loosen the failure gate accordingly.
  QuadratureSpec quad;
  quad.rel_tol = 2e-3;
  const auto curve = tradeoff_curve(p, model, PerturbationKind::kGramBased, grid, quad);
  REQUIRE(curve.size() == grid.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    REQUIRE(curve[i].se_converged);
    REQUIRE_FALSE(curve[i].integration_failed);
    if (i > 0) REQUIRE(curve[i].cw_onave_kl < curve[i - 1].cw_onave_kl);  // decreasing in sigma
  }
}

TEST_CASE("single-point grid at zero budget yields one sentinel row") {
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.0};
  const auto curve = tradeoff_curve(p, CovariateScaleModel::uniform_unit(),
                                    PerturbationKind::kIsotropic, {0.0}, QuadratureSpec{});
  REQUIRE(curve.size() == 1);
  REQUIRE(curve[0].se_converged);
  REQUIRE(std::isinf(curve[0].cw_onave_kl));
}

TEST_CASE("non-convergent cells are emitted with flags") {
  HyperParams p{0.5, 0.1, 0.1, 0.05, 0.0};
  const std::vector<double> grid{0.01, 0.4};  // the large-budget cell is unstable at this lambda
  const auto curve = tradeoff_curve(p, CovariateScaleModel::log_normal(0.0, 0.5),
                                    PerturbationKind::kGramBased, grid, QuadratureSpec{});
  REQUIRE(curve.size() == 2);
  bool some_failure = false;
  for (const auto& pt : curve) some_failure = some_failure || !pt.se_converged || pt.integration_failed;
  REQUIRE(some_failure);
}

TEST_CASE("grid validation") {
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.0};
  REQUIRE_THROWS_AS(tradeoff_curve(p, CovariateScaleModel::uniform_unit(), PerturbationKind::kIsotropic,
                                   {0.2, 0.1}, QuadratureSpec{}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(tradeoff_curve(p, CovariateScaleModel::uniform_unit(), PerturbationKind::kIsotropic,
                                   {-0.1, 0.2}, QuadratureSpec{}),
                    std::invalid_argument);
}
