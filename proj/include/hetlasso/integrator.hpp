#pragma once

// Integrator selection for the state-evolution and privacy expectations.
//
// Quadrature is the default: a tensor rule over the scale distribution and
// the Bernoulli-Gaussian signal (atom handled exactly, Gaussian slab by
// Gauss-Hermite), with the channel Gaussian integrated in closed form where
// possible. Every expectation is also evaluated on a lower-order rule; the
// difference is the error estimate, and exceeding the relative tolerance is
// an integration failure. This matters: for some parameter regions (small
// scales under isotropic noise) the underlying expectation has a heavy
// 1/v^2 tail and no quadrature value is trustworthy - those cells must fail
// loudly rather than return junk.
//
// Monte Carlo draws (v, x0, z, eta) directly and evaluates the raw
// thresholding kernels; it is the independent cross-check route. Fixed seed
// per call, so repeated evaluation is deterministic.

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

namespace hetlasso {

struct QuadratureSpec {
  int scale_order = 0;         // 0 = auto: 101 (Gauss-Legendre) for UniformUnit,
                               //           121 (Gauss-Hermite) for LogNormal
  int scale_check_order = 0;   // 0 = auto: 71 / 81 respectively
  int channel_order = 201;     // Gauss-Hermite order over the privacy channel
  int channel_check_order = 127;  // (state evolution needs no channel rule)
  double rel_tol = 5e-4;       // integration-failure threshold
};

struct MonteCarloSpec {
  std::uint64_t n_samples = 1000000;
  std::uint64_t seed = 1;
  double rel_tol = 5e-2;  // on the standard error of the mean
};

using IntegratorSpec = std::variant<QuadratureSpec, MonteCarloSpec>;

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double estimated_error, double tolerance)
      : std::runtime_error(what + " (estimated relative error " + std::to_string(estimated_error) +
                           " exceeds tolerance " + std::to_string(tolerance) + ")"),
        estimated_error(estimated_error),
        tolerance(tolerance) {}
  double estimated_error;
  double tolerance;
};

inline std::string describe(const IntegratorSpec& spec) {
  if (const auto* q = std::get_if<QuadratureSpec>(&spec)) {
    std::ostringstream os;
    os << "quadrature(scale=" << q->scale_order << ",channel=" << q->channel_order
       << ",tol=" << q->rel_tol << ")";
    return os.str();
  }
  const auto& mc = std::get<MonteCarloSpec>(spec);
  std::ostringstream os;
  os << "monte_carlo(n=" << mc.n_samples << ",seed=" << mc.seed << ")";
  return os.str();
}

}  // namespace hetlasso
