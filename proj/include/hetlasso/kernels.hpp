#pragma once

// Scalar denoising and privacy kernels shared by the AMP engine, the state
// evolution recursion, and the privacy metric. All functions are pure.
//
// Notation: Sigma is the effective variance of the decoupled scalar channel,
// m the pre-threshold estimate, lambda the l1 weight, sigma_eta_v the
// per-coordinate perturbation std dev.

#include <cmath>
#include <stdexcept>
#include <string>

namespace hetlasso {

struct ThresholdInput {
  double sigma_big;  // > 0
  double m;
  double lambda;  // > 0
};

namespace detail {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Standard normal pdf and upper tail probability.
inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
inline double normal_tail(double x) { return 0.5 * std::erfc(x / kSqrt2); }

}  // namespace detail

// Soft-threshold posterior mean: (m - sgn(m) * lambda * Sigma) if
// |m| > lambda * Sigma, else 0. Odd in m and 1-Lipschitz.
inline double soft_mean(const ThresholdInput& t) {
  const double threshold = t.lambda * t.sigma_big;
  if (t.m > threshold) return t.m - threshold;
  if (t.m < -threshold) return t.m + threshold;
  return 0.0;
}

inline double soft_mean(double sigma_big, double m, double lambda) {
  return soft_mean(ThresholdInput{sigma_big, m, lambda});
}

// Soft-threshold variance surrogate: Sigma on the active set, 0 otherwise.
inline double soft_var(const ThresholdInput& t) {
  return std::abs(t.m) > t.lambda * t.sigma_big ? t.sigma_big : 0.0;
}

inline double soft_var(double sigma_big, double m, double lambda) {
  return soft_var(ThresholdInput{sigma_big, m, lambda});
}

// Probability that the coordinate is active once the Gaussian perturbation
// is averaged out:
//   r_hat = 1/2 [ erfc((-m_hat + lambda Sigma)/(sqrt(2) Sigma sigma_eta))
//               + erfc(( m_hat + lambda Sigma)/(sqrt(2) Sigma sigma_eta)) ].
// Symmetric in m_hat <-> -m_hat, and in [0, 1] for all valid inputs.
inline double r_hat(double m_hat, double sigma_big, double lambda, double sigma_eta_v) {
  if (!(sigma_eta_v > 0.0)) throw std::domain_error("r_hat: sigma_eta_v must be positive");
  const double k = 1.0 / (sigma_big * sigma_eta_v);
  const double a = (lambda * sigma_big - m_hat) * k;
  const double b = (lambda * sigma_big + m_hat) * k;
  return detail::normal_tail(a) + detail::normal_tail(b);
}

// 1 - r_hat computed without cancellation: erfc(-a) - erfc(b) keeps full
// relative accuracy when r_hat is close to 1 (both terms are then tiny and
// the larger dominates).
inline double one_minus_r_hat(double m_hat, double sigma_big, double lambda, double sigma_eta_v) {
  if (!(sigma_eta_v > 0.0)) throw std::domain_error("one_minus_r_hat: sigma_eta_v must be positive");
  const double k = 1.0 / (sigma_big * sigma_eta_v);
  const double am = std::abs(m_hat);
  const double a = (lambda * sigma_big - am) * k;
  const double b = (lambda * sigma_big + am) * k;
  return detail::normal_tail(-a) - detail::normal_tail(b);
}

// Analytic d r_hat / d m_hat. Gaussian-density form; validated against
// central finite differences in the test suite.
inline double r_hat_d1(double m_hat, double sigma_big, double lambda, double sigma_eta_v) {
  if (!(sigma_eta_v > 0.0)) throw std::domain_error("r_hat_d1: sigma_eta_v must be positive");
  const double k = 1.0 / (sigma_big * sigma_eta_v);
  const double a = (lambda * sigma_big - m_hat) * k;
  const double b = (lambda * sigma_big + m_hat) * k;
  return k * (detail::normal_pdf(a) - detail::normal_pdf(b));
}

// Analytic d^2 r_hat / d m_hat^2; even in m_hat.
inline double r_hat_d2(double m_hat, double sigma_big, double lambda, double sigma_eta_v) {
  if (!(sigma_eta_v > 0.0)) throw std::domain_error("r_hat_d2: sigma_eta_v must be positive");
  const double k = 1.0 / (sigma_big * sigma_eta_v);
  const double a = (lambda * sigma_big - m_hat) * k;
  const double b = (lambda * sigma_big + m_hat) * k;
  return k * k * (a * detail::normal_pdf(a) + b * detail::normal_pdf(b));
}

// Thrown by big_r when 1 - r_hat falls below the guard threshold and the
// three-term expression is numerically undefined.
class SingularityError : public std::domain_error {
 public:
  SingularityError(double m_hat, double sigma_big, double sigma_eta_v)
      : std::domain_error("big_r singular (r_hat ~ 1) at m_hat=" + std::to_string(m_hat) +
                          " Sigma=" + std::to_string(sigma_big) +
                          " sigma_eta=" + std::to_string(sigma_eta_v)),
        m_hat(m_hat),
        sigma_big(sigma_big),
        sigma_eta_v(sigma_eta_v) {}

  double m_hat;
  double sigma_big;
  double sigma_eta_v;
};

inline constexpr double kBigRGuard = 1e-12;

// Three-term privacy kernel
//   R = (d1)^2 / (1 - r_hat) + d2 + r_hat / (Sigma^2 sigma_eta^2).
// Errors when 1 - r_hat < 1e-12; quadrature callers that can take the
// analytic limit use big_r_guarded instead.
inline double big_r(double m_hat, double sigma_big, double lambda, double sigma_eta_v) {
  const double om = one_minus_r_hat(m_hat, sigma_big, lambda, sigma_eta_v);
  if (om < kBigRGuard) throw SingularityError(m_hat, sigma_big, sigma_eta_v);
  const double r = r_hat(m_hat, sigma_big, lambda, sigma_eta_v);
  const double d1 = r_hat_d1(m_hat, sigma_big, lambda, sigma_eta_v);
  const double d2 = r_hat_d2(m_hat, sigma_big, lambda, sigma_eta_v);
  const double k = 1.0 / (sigma_big * sigma_eta_v);
  return d1 * d1 / om + d2 + r * k * k;
}

// As big_r, but with the r_hat -> 1 limit applied: d1^2 decays at twice the
// Gaussian rate of 1 - r_hat, so the first term tends to 0 and is dropped
// once 1 - r_hat < 1e-12. Used inside the privacy integrand where the
// threshold lambda * Sigma is strictly positive and the limit is exact.
inline double big_r_guarded(double m_hat, double sigma_big, double lambda, double sigma_eta_v) {
  const double om = one_minus_r_hat(m_hat, sigma_big, lambda, sigma_eta_v);
  const double r = r_hat(m_hat, sigma_big, lambda, sigma_eta_v);
  const double d1 = r_hat_d1(m_hat, sigma_big, lambda, sigma_eta_v);
  const double d2 = r_hat_d2(m_hat, sigma_big, lambda, sigma_eta_v);
  const double k = 1.0 / (sigma_big * sigma_eta_v);
  const double first = om < kBigRGuard ? 0.0 : d1 * d1 / om;
  return first + d2 + r * k * k;
}

}  // namespace hetlasso
