#pragma once

// Perturbation-noise allocation and drawing, plus the effective-anisotropy
// probe that demonstrates how the inverse Gram matrix reshapes injected
// noise.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cstdint>
#include <stdexcept>

#include "hetlasso/rng.hpp"
#include "hetlasso/types.hpp"

namespace hetlasso {

// Per-coordinate noise variances.
//
// Isotropic: every coordinate gets sigma_eta_bar_sq.
// GramBased: sigma_{eta,i}^2 = v_i^2 / mean(v^2) * sigma_eta_bar_sq, with the
// empirical mean of v^2 of the realized instance in the denominator, which
// makes budget conservation (sum == N * sigma_eta_bar_sq) exact per instance.
inline Eigen::VectorXd allocate_variances(const PerturbationScheme& scheme, const Eigen::VectorXd& v) {
  if ((v.array() <= 0.0).any() || !v.allFinite())
    throw std::domain_error("allocate_variances: scales must be positive and finite");
  const auto n = v.size();
  if (scheme.kind == PerturbationKind::kIsotropic)
    return Eigen::VectorXd::Constant(n, scheme.sigma_eta_bar_sq);
  const double mean_v2 = v.array().square().mean();
  return (v.array().square() / mean_v2 * scheme.sigma_eta_bar_sq).matrix();
}

// Draws eta_i ~ N(0, variances_i) independently from the kEta substream.
inline NoiseRealization draw_eta(const Eigen::VectorXd& variances, std::uint64_t seed,
                                 const PerturbationScheme& scheme) {
  if ((variances.array() < 0.0).any())
    throw std::domain_error("draw_eta: variances must be nonnegative");
  Rng rng = Rng::substream(seed, StreamTag::kEta);
  NoiseRealization out;
  out.variances = variances;
  out.scheme = scheme;
  out.eta.resize(variances.size());
  for (Eigen::Index i = 0; i < variances.size(); ++i)
    out.eta[i] = std::sqrt(variances[i]) * rng.gaussian();
  out.check();
  return out;
}

// Allocate-and-draw convenience used by the harness.
inline NoiseRealization draw_eta(const PerturbationScheme& scheme, const Eigen::VectorXd& v,
                                 std::uint64_t seed) {
  return draw_eta(allocate_variances(scheme, v), seed, scheme);
}

class SingularGramError : public std::runtime_error {
 public:
  explicit SingularGramError(double cond)
      : std::runtime_error("effective_noise_probe: Gram matrix condition number " +
                           std::to_string(cond) + " exceeds 1e12"),
        condition_number(cond) {}
  double condition_number;
};

// Monte-Carlo estimate of the per-coordinate std dev of (F^T F)^{-1} eta.
// Requires an invertible Gram matrix (M >= N); intended as a diagnostic on
// small instances (N <= 500), it uses a dense factorization.
inline Eigen::VectorXd effective_noise_probe(const ProblemInstance& inst, const PerturbationScheme& scheme,
                                             int n_draws, std::uint64_t seed) {
  if (n_draws < 2) throw std::invalid_argument("effective_noise_probe: need at least 2 draws");
  const Eigen::MatrixXd gram = inst.F.transpose() * inst.F;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12)) throw SingularGramError(cond);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd variances = allocate_variances(scheme, inst.v);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(inst.n());
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(inst.n());
  for (int d = 0; d < n_draws; ++d) {
    const NoiseRealization noise = draw_eta(variances, seed + static_cast<std::uint64_t>(d), scheme);
    const Eigen::VectorXd shift = ldlt.solve(noise.eta);
    sum += shift;
    sum_sq += shift.array().square().matrix();
  }
  const double inv_n = 1.0 / static_cast<double>(n_draws);
  Eigen::ArrayXd var = sum_sq.array() * inv_n - (sum.array() * inv_n).square();
  return var.max(0.0).sqrt().matrix();
}

}  // namespace hetlasso
