#pragma once

// State evolution for AMP under heterogeneous covariate scales.
//
// The decoupled scalar channel for a coordinate with scale v (and channel
// scale w = v^2) at order parameters (E, V):
//
//   Sigma_w   = (1 + V) / (alpha w)
//   sigma_z   = sqrt(E / (alpha w))
//   x_hat     = soft_mean(Sigma_w, x0 + sigma_z z - eta Sigma_w)   (*)
//
// with z ~ N(0,1) and eta ~ N(0, sigma_eta^2(v)); sigma_eta^2(v) is the
// scheme's allocation rule with the population scale moment. The recursion
// (both right-hand sides evaluated at the incoming (E, V), Jacobi style):
//
//   E' = < w (x0 - x_hat)^2 > + sigma_xi^2
//   V' = < w soft_var(...) > = (1 + V) rho_hat / alpha
//
// where < . > averages over (v, x0, z, eta) and rho_hat is the probability
// that the channel estimate (*) is nonzero.
//
// Conditional on (v, x0), the channel input is Gaussian:
// x0 + sigma_z z - eta Sigma_w ~ N(x0, sigma_z^2 + Sigma_w^2 sigma_eta^2(v)),
// so the inner integral reduces to closed-form soft-threshold moments
// (erfc/exp) and quadrature only runs over (v, x0 slab).

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetlasso/instance.hpp"
#include "hetlasso/integrator.hpp"
#include "hetlasso/kernels.hpp"
#include "hetlasso/quadrature.hpp"
#include "hetlasso/rng.hpp"
#include "hetlasso/types.hpp"

namespace hetlasso {

struct SeState {
  double E = 0.0;  // generalization-error order parameter
  double V = 0.0;  // variance order parameter
  int iteration = 0;
};

struct SeSolution {
  double E_star = 0.0;
  double V_star = 0.0;
  double rho_hat_se = 0.0;
  bool stable = false;     // rho_hat_se < alpha
  bool converged = false;
  int iterations = 0;
  std::string integrator;
};

// E[(mu - soft(U, tau))^2] for U ~ N(mu, sigma^2): the closed form used by
// the quadrature path (second moments of the soft threshold in erfc/exp).
inline double soft_threshold_sq_error(double mu, double sigma, double tau) {
  using detail::normal_pdf;
  using detail::normal_tail;
  if (sigma <= 0.0) {
    const double shrunk = soft_mean(ThresholdInput{1.0, mu, tau});  // threshold tau * 1
    return (mu - shrunk) * (mu - shrunk);
  }
  const double a = (tau - mu) / sigma;
  const double b = (tau + mu) / sigma;
  double value = mu * mu * (1.0 - normal_tail(a) - normal_tail(b));
  for (double c : {a, b}) {
    value += (tau * tau + sigma * sigma) * normal_tail(c) - 2.0 * tau * sigma * normal_pdf(c) +
             sigma * sigma * c * normal_pdf(c);
  }
  return value;
}

// P(|U| > tau) for U ~ N(mu, sigma^2).
inline double soft_threshold_active_prob(double mu, double sigma, double tau) {
  using detail::normal_tail;
  if (sigma <= 0.0) return std::abs(mu) > tau ? 1.0 : 0.0;
  return normal_tail((tau - mu) / sigma) + normal_tail((tau + mu) / sigma);
}

// Scheme's per-coordinate noise variance as a function of the scale, with
// the population moment E[v^2] in the Gram denominator.
inline double sigma_eta_sq_of_scale(const PerturbationScheme& scheme, const CovariateScaleModel& model,
                                    double v) {
  if (scheme.kind == PerturbationKind::kIsotropic) return scheme.sigma_eta_bar_sq;
  return v * v * scheme.sigma_eta_bar_sq / model.second_moment();
}

// Scalar estimator of the decoupled channel; used by distribution-matching
// tests against empirical AMP coordinate laws.
inline double decoupled_sample(const HyperParams& p, double v, double x0, double z, double eta, double E,
                               double V) {
  if (!(v > 0.0)) throw std::domain_error("decoupled_sample: v must be positive");
  if (!(E >= 0.0 && V >= 0.0)) throw std::domain_error("decoupled_sample: E and V must be nonnegative");
  const double w = v * v;
  const double sigma = (1.0 + V) / (p.alpha * w);
  const double u = x0 + std::sqrt(E / (p.alpha * w)) * z - eta * sigma;
  return soft_mean(ThresholdInput{sigma, u, p.lambda});
}

struct SeRhs {
  double E_next = 0.0;
  double V_next = 0.0;
  double rho_hat = 0.0;
  double err_E = 0.0;    // estimated relative error on E_next
  double err_rho = 0.0;  // estimated absolute error on rho_hat
};

namespace detail_se {

struct ScaleRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

inline ScaleRule scale_rule(const CovariateScaleModel& model, int order) {
  ScaleRule rule;
  model.visit([&](const auto& m) {
    using T = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<T, CovariateScaleModel::ConstantOne>) {
      rule.nodes = Eigen::VectorXd::Constant(1, 1.0);
      rule.weights = Eigen::VectorXd::Constant(1, 1.0);
    } else if constexpr (std::is_same_v<T, CovariateScaleModel::UniformUnit>) {
      const QuadratureRule& gl = gauss_legendre(order);
      rule.nodes = (gl.nodes.array() + 1.0) / 2.0;
      rule.weights = gl.weights / 2.0;
    } else if constexpr (std::is_same_v<T, CovariateScaleModel::LogNormal>) {
      const QuadratureRule& gh = gauss_hermite(order);
      rule.nodes = (m.mu_log + m.sigma_log * std::sqrt(2.0) * gh.nodes.array()).exp();
      rule.weights = gh.weights / std::sqrt(3.14159265358979323846);
    } else {
      // Explicit list: the expectation over P_v is the exact average.
      const auto n = static_cast<Eigen::Index>(m.samples.size());
      rule.nodes.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) rule.nodes[i] = m.samples[static_cast<std::size_t>(i)];
      rule.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    }
  });
  return rule;
}

inline int auto_scale_order(const CovariateScaleModel& model, bool check) {
  // LogNormal converges slower in Gauss-Hermite order than UniformUnit does
  // in Gauss-Legendre; measured defaults.
  int main_order = 101, check_order = 71;
  model.visit([&](const auto& m) {
    using T = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<T, CovariateScaleModel::LogNormal>) {
      main_order = 121;
      check_order = 81;
    }
  });
  return check ? check_order : main_order;
}

// One quadrature evaluation of the right-hand sides at a given scale order.
// The whole channel integral is closed-form: conditional on the scale, the
// channel input u = x0 + sigma_z z - eta Sigma is Gaussian around x0, and
// the Gaussian-slab part of the signal folds in as well. Writing
// s_u^2 = 1 + sigma_c^2 for the marginal std of u on the slab and using
// Stein's identity E[x0 soft(u, tau)] = Cov(x0, u) P(|u| > tau):
//
//   E[(x0 - soft(u, tau))^2 | slab] = 1 - 2 P(|u| > tau) + E[soft(u, tau)^2]
//
// with u ~ N(0, s_u^2), and both remaining terms are the closed-form
// soft-threshold moments. Only the scale integral is numeric.
struct RawRhs {
  double e_sum = 0.0;
  double rho = 0.0;
};

inline RawRhs quadrature_pass(double E, double V, const HyperParams& p, const CovariateScaleModel& model,
                              const PerturbationScheme& scheme, int scale_order) {
  const ScaleRule vr = scale_rule(model, scale_order);
  RawRhs out;
  for (Eigen::Index iv = 0; iv < vr.nodes.size(); ++iv) {
    const double v = vr.nodes[iv];
    const double w = v * v;
    const double sigma_big = (1.0 + V) / (p.alpha * w);
    const double tau = p.lambda * sigma_big;
    const double var_channel =
        E / (p.alpha * w) + sigma_big * sigma_big * sigma_eta_sq_of_scale(scheme, model, v);
    const double sigma_c = std::sqrt(var_channel);

    double e_acc = (1.0 - p.rho) * soft_threshold_sq_error(0.0, sigma_c, tau);
    double r_acc = (1.0 - p.rho) * soft_threshold_active_prob(0.0, sigma_c, tau);
    if (p.rho > 0.0) {
      const double s_u = std::sqrt(1.0 + var_channel);
      const double p_act = soft_threshold_active_prob(0.0, s_u, tau);
      e_acc += p.rho * (1.0 - 2.0 * p_act + soft_threshold_sq_error(0.0, s_u, tau));
      r_acc += p.rho * p_act;
    }
    out.e_sum += vr.weights[iv] * w * e_acc;
    out.rho += vr.weights[iv] * r_acc;
  }
  return out;
}

}  // namespace detail_se

// Evaluates (E', V', rho_hat) at the incoming (E, V). Quadrature evaluates a
// lower-order companion rule as well and reports the difference as the error
// estimate; Monte Carlo reports the standard error. Throws IntegrationError
// when the estimate exceeds the integrator's tolerance.
inline SeRhs evaluate_se_rhs(double E, double V, const HyperParams& p, const CovariateScaleModel& model,
                             const PerturbationScheme& scheme, const IntegratorSpec& integrator) {
  require_valid(p);
  if (!(E >= 0.0 && V >= 0.0) || !std::isfinite(E) || !std::isfinite(V))
    throw std::invalid_argument("evaluate_se_rhs: E and V must be finite and nonnegative");

  SeRhs rhs;
  if (const auto* quad = std::get_if<QuadratureSpec>(&integrator)) {
    const int so = quad->scale_order > 0 ? quad->scale_order : detail_se::auto_scale_order(model, false);
    const int sc = quad->scale_check_order > 0 ? quad->scale_check_order : detail_se::auto_scale_order(model, true);
    const auto main = detail_se::quadrature_pass(E, V, p, model, scheme, so);
    const auto check = detail_se::quadrature_pass(E, V, p, model, scheme, sc);
    rhs.E_next = main.e_sum + p.sigma_xi * p.sigma_xi;
    rhs.rho_hat = main.rho;
    rhs.V_next = (1.0 + V) * main.rho / p.alpha;
    const double check_E = check.e_sum + p.sigma_xi * p.sigma_xi;
    rhs.err_E = std::abs(rhs.E_next - check_E) / std::max(std::abs(rhs.E_next), 1e-12);
    rhs.err_rho = std::abs(rhs.rho_hat - check.rho);
    if (rhs.err_E > quad->rel_tol || rhs.err_rho > quad->rel_tol)
      throw IntegrationError("state-evolution quadrature did not converge in order",
                             std::max(rhs.err_E, rhs.err_rho), quad->rel_tol);
    return rhs;
  }

  const auto& mc = std::get<MonteCarloSpec>(integrator);
  if (mc.n_samples < 2) throw std::invalid_argument("evaluate_se_rhs: need at least 2 samples");
  Rng scale_rng = Rng::substream(mc.seed, StreamTag::kScales);
  Rng signal_rng = Rng::substream(mc.seed, StreamTag::kSignal);
  Rng z_rng = Rng::substream(mc.seed, StreamTag::kMonteCarlo);
  Rng eta_rng = Rng::substream(mc.seed, StreamTag::kEta);

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

  double sum_e = 0.0, sum_e2 = 0.0, sum_v = 0.0, sum_r = 0.0;
  for (std::uint64_t i = 0; i < mc.n_samples; ++i) {
    const double v = draw_scale();
    const double w = v * v;
    const double sigma_big = (1.0 + V) / (p.alpha * w);
    const double x0 = signal_rng.uniform01() < p.rho ? signal_rng.gaussian() : 0.0;
    const double z = z_rng.gaussian();
    const double eta = std::sqrt(sigma_eta_sq_of_scale(scheme, model, v)) * eta_rng.gaussian();
    const double u = x0 + std::sqrt(E / (p.alpha * w)) * z - eta * sigma_big;
    const ThresholdInput t{sigma_big, u, p.lambda};
    const double x_hat = soft_mean(t);
    const double te = w * (x0 - x_hat) * (x0 - x_hat);
    sum_e += te;
    sum_e2 += te * te;
    sum_v += w * soft_var(t);
    sum_r += x_hat != 0.0 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(mc.n_samples);
  const double mean_e = sum_e / n;
  rhs.E_next = mean_e + p.sigma_xi * p.sigma_xi;
  rhs.V_next = sum_v / n;
  rhs.rho_hat = sum_r / n;
  const double var_e = std::max(0.0, sum_e2 / n - mean_e * mean_e);
  rhs.err_E = std::sqrt(var_e / n) / std::max(std::abs(rhs.E_next), 1e-12);
  rhs.err_rho = std::sqrt(rhs.rho_hat * std::max(0.0, 1.0 - rhs.rho_hat) / n);
  if (rhs.err_E > mc.rel_tol)
    throw IntegrationError("state-evolution Monte Carlo standard error too large", rhs.err_E, mc.rel_tol);
  return rhs;
}

inline SeState se_update(const SeState& state, const HyperParams& p, const CovariateScaleModel& model,
                         const PerturbationScheme& scheme, const IntegratorSpec& integrator) {
  const SeRhs rhs = evaluate_se_rhs(state.E, state.V, p, model, scheme, integrator);
  return SeState{rhs.E_next, rhs.V_next, state.iteration + 1};
}

struct SeInit {
  double E0 = -1.0;  // negative = default rho + sigma_xi^2
  double V0 = -1.0;  // negative = default rho / alpha
};

inline constexpr double kSeDivergenceCap = 1e9;

// Iterates the recursion to a fixed point. Non-convergence (max_iter or a
// diverging trajectory, which happens when rho_hat stays above alpha) is
// reported through `converged`; rho_hat_se and the stability flag are
// evaluated at the last iterate either way.
inline SeSolution se_fixed_point(const HyperParams& p, const CovariateScaleModel& model,
                                 const PerturbationScheme& scheme, const IntegratorSpec& integrator,
                                 SeInit init = SeInit{}, int max_iter = 5000, double tol = 1e-10) {
  require_valid(p);
  if (!(tol > 0.0)) throw std::invalid_argument("se_fixed_point: tol must be positive");
  double E = init.E0 >= 0.0 ? init.E0 : p.rho + p.sigma_xi * p.sigma_xi;
  double V = init.V0 >= 0.0 ? init.V0 : p.rho / p.alpha;

  SeSolution sol;
  sol.integrator = describe(integrator);
  double rho = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const SeRhs rhs = evaluate_se_rhs(E, V, p, model, scheme, integrator);
    rho = rhs.rho_hat;
    sol.iterations = it;
    if (!std::isfinite(rhs.E_next) || !std::isfinite(rhs.V_next) || rhs.E_next > kSeDivergenceCap ||
        rhs.V_next > kSeDivergenceCap) {
      E = rhs.E_next;
      V = rhs.V_next;
      break;  // diverging trajectory; converged stays false
    }
    const bool done = std::abs(rhs.E_next - E) <= tol * std::max(std::abs(rhs.E_next), 1e-300) &&
                      std::abs(rhs.V_next - V) <= tol * (1.0 + std::abs(rhs.V_next));
    E = rhs.E_next;
    V = rhs.V_next;
    if (done) {
      sol.converged = true;
      break;
    }
  }
  sol.E_star = E;
  sol.V_star = V;
  sol.rho_hat_se = rho;
  sol.stable = rho < p.alpha;
  return sol;
}

// alpha - rho_hat_se; positive means the AMP fixed point is predicted stable.
inline double stability_margin(const SeSolution& sol, const HyperParams& p) {
  return p.alpha - sol.rho_hat_se;
}

}  // namespace hetlasso
