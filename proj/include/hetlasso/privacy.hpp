#pragma once

// Asymptotic component-wise on-average KL divergence of the perturbed
// estimator, evaluated from a converged state-evolution solution:
//
//   cwOnAveKL = alpha^{-2} E* . < R_v / v^2 >_{v, x0, z}
//
// with m_hat = x0 + sqrt(E*/(alpha w)) z, Sigma_w = (1+V*)/(alpha w),
// w = v^2, sigma_eta(v) the scheme's allocation, and R_v the three-term
// kernel of kernels.hpp. The metric diverges as the perturbation vanishes;
// sigma_eta_bar_sq == 0 returns +infinity as the documented sentinel.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hetlasso/integrator.hpp"
#include "hetlasso/kernels.hpp"
#include "hetlasso/quadrature.hpp"
#include "hetlasso/rng.hpp"
#include "hetlasso/state_evolution.hpp"
#include "hetlasso/types.hpp"

namespace hetlasso {

namespace detail_privacy {

// The integrand depends on (x0, z) only through m_hat = x0 + sigma_z z, so
// the signal atom contributes E[R(m_hat)] with m_hat ~ N(0, sigma_z^2) and
// the Gaussian slab with m_hat ~ N(0, 1 + sigma_z^2): one Gauss-Hermite rule
// per branch instead of a tensor product.
inline double quadrature_pass(double E, double V, const HyperParams& p, const CovariateScaleModel& model,
                              const PerturbationScheme& scheme, int scale_order, int channel_order) {
  const detail_se::ScaleRule vr = detail_se::scale_rule(model, scale_order);
  const QuadratureRule normal = standard_normal_rule(channel_order);
  double acc = 0.0;
  for (Eigen::Index iv = 0; iv < vr.nodes.size(); ++iv) {
    const double v = vr.nodes[iv];
    const double w = v * v;
    const double sigma_big = (1.0 + V) / (p.alpha * w);
    const double var_z = E / (p.alpha * w);
    const double sigma_eta = std::sqrt(sigma_eta_sq_of_scale(scheme, model, v));

    auto gaussian_integral = [&](double m_std) {
      double zi = 0.0;
      for (Eigen::Index k = 0; k < normal.nodes.size(); ++k)
        zi += normal.weights[k] * big_r_guarded(m_std * normal.nodes[k], sigma_big, p.lambda, sigma_eta);
      return zi;
    };
    double v_acc = (1.0 - p.rho) * gaussian_integral(std::sqrt(var_z));
    if (p.rho > 0.0) v_acc += p.rho * gaussian_integral(std::sqrt(1.0 + var_z));
    acc += vr.weights[iv] * v_acc / w;
  }
  return acc;
}

}  // namespace detail_privacy

// The expectation < R_v / v^2 > at given order parameters, by the configured
// integrator. Exposed separately so tests can cross-check routes.
inline double privacy_expectation(double E, double V, const HyperParams& p,
                                  const CovariateScaleModel& model, const PerturbationScheme& scheme,
                                  const IntegratorSpec& integrator, double* error_estimate = nullptr) {
  if (const auto* quad = std::get_if<QuadratureSpec>(&integrator)) {
    const int so = quad->scale_order > 0 ? quad->scale_order : detail_se::auto_scale_order(model, false);
    const int sc =
        quad->scale_check_order > 0 ? quad->scale_check_order : detail_se::auto_scale_order(model, true);
    // The channel integrand develops a boundary layer of width ~ Sigma
    // sigma_eta around the thresholds; when the base rule cannot resolve it
    // the order is escalated once before failing.
    int order = quad->channel_order;
    int check_order = quad->channel_check_order;
    double err = 0.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const double main = detail_privacy::quadrature_pass(E, V, p, model, scheme, so, order);
      const double check = detail_privacy::quadrature_pass(E, V, p, model, scheme, sc, check_order);
      err = std::abs(main - check) / std::max(std::abs(main), 1e-12);
      if (error_estimate != nullptr) *error_estimate = err;
      if (err <= quad->rel_tol) return main;
      check_order = order;
      order = 3 * order + 1;
    }
    throw IntegrationError("privacy quadrature did not converge in order", err, quad->rel_tol);
  }

  const auto& mc = std::get<MonteCarloSpec>(integrator);
  if (mc.n_samples < 2) throw std::invalid_argument("privacy_expectation: need at least 2 samples");
  Rng scale_rng = Rng::substream(mc.seed, StreamTag::kScales);
  Rng signal_rng = Rng::substream(mc.seed, StreamTag::kSignal);
  Rng z_rng = Rng::substream(mc.seed, StreamTag::kMonteCarlo);

  const CovariateScaleModel* model_ptr = &model;
  auto draw_scale = [&]() -> double {
    double out = 1.0;
    model_ptr->visit([&](const auto& m) {
      using T = std::decay_t<decltype(m)>;
      if constexpr (std::is_same_v<T, CovariateScaleModel::ConstantOne>) {
        out = 1.0;
      } else if constexpr (std::is_same_v<T, CovariateScaleModel::UniformUnit>) {
        out = scale_rng.uniform_unit();
      } else if constexpr (std::is_same_v<T, CovariateScaleModel::LogNormal>) {
        out = std::exp(m.mu_log + m.sigma_log * scale_rng.gaussian());
      } else {
        out = m.samples[static_cast<std::size_t>(scale_rng.next_u64() % m.samples.size())];
      }
    });
    return out;
  };

  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t i = 0; i < mc.n_samples; ++i) {
    const double v = draw_scale();
    const double w = v * v;
    const double sigma_big = (1.0 + V) / (p.alpha * w);
    const double sigma_eta = std::sqrt(sigma_eta_sq_of_scale(scheme, model, v));
    const double x0 = signal_rng.uniform01() < p.rho ? signal_rng.gaussian() : 0.0;
    const double m_hat = x0 + std::sqrt(E / (p.alpha * w)) * z_rng.gaussian();
    const double t = big_r_guarded(m_hat, sigma_big, p.lambda, sigma_eta) / w;
    sum += t;
    sum_sq += t * t;
  }
  const double n = static_cast<double>(mc.n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  const double err = std::sqrt(var / n) / std::max(std::abs(mean), 1e-12);
  if (error_estimate != nullptr) *error_estimate = err;
  if (err > mc.rel_tol)
    throw IntegrationError("privacy Monte Carlo standard error too large", err, mc.rel_tol);
  return mean;
}

// cwOnAveKL at a converged state-evolution solution. Returns +infinity when
// the perturbation budget is zero (the metric's divergence sentinel).
inline double cw_on_ave_kl(const SeSolution& sol, const HyperParams& p, const CovariateScaleModel& model,
                           const PerturbationScheme& scheme, const IntegratorSpec& integrator) {
  if (!sol.converged) throw std::invalid_argument("cw_on_ave_kl: state evolution did not converge");
  if (scheme.sigma_eta_bar_sq == 0.0) return std::numeric_limits<double>::infinity();
  const double expectation =
      privacy_expectation(sol.E_star, sol.V_star, p, model, scheme, integrator);
  return sol.E_star / (p.alpha * p.alpha) * expectation;
}

struct TradeoffPoint {
  double sigma_eta_bar = 0.0;  // std-dev units, sqrt of the variance budget
  double E_star = 0.0;
  double cw_onave_kl = 0.0;
  bool se_converged = false;
  bool stable = false;
  bool integration_failed = false;
};

// Solves state evolution and evaluates the metric along a grid of
// sigma_eta_bar (std-dev) values. Failed cells are emitted with flags set,
// never dropped.
inline std::vector<TradeoffPoint> tradeoff_curve(const HyperParams& p, const CovariateScaleModel& model,
                                                 PerturbationKind kind,
                                                 const std::vector<double>& sigma_eta_grid,
                                                 const IntegratorSpec& integrator) {
  for (std::size_t i = 0; i < sigma_eta_grid.size(); ++i) {
    if (!(sigma_eta_grid[i] >= 0.0)) throw std::invalid_argument("tradeoff_curve: grid values must be >= 0");
    if (i > 0 && sigma_eta_grid[i] < sigma_eta_grid[i - 1])
      throw std::invalid_argument("tradeoff_curve: grid must be sorted ascending");
  }
  std::vector<TradeoffPoint> curve;
  curve.reserve(sigma_eta_grid.size());
  for (double sbar : sigma_eta_grid) {
    TradeoffPoint pt;
    pt.sigma_eta_bar = sbar;
    HyperParams cell = p;
    cell.sigma_eta_bar_sq = sbar * sbar;
    const PerturbationScheme scheme{kind, sbar * sbar};
    try {
      const SeSolution sol = se_fixed_point(cell, model, scheme, integrator);
      pt.se_converged = sol.converged;
      pt.stable = sol.stable;
      pt.E_star = sol.E_star;
      if (sol.converged) pt.cw_onave_kl = cw_on_ave_kl(sol, cell, model, scheme, integrator);
    } catch (const IntegrationError&) {
      pt.integration_failed = true;
    }
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace hetlasso
