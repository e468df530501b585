#pragma once

// Seeded generation of synthetic problem instances.
//
// The data model: F_{mu i} = Ftilde_{mu i} * v_i with Ftilde ~ N(0, 1/N),
// scales v_i drawn i.i.d. from a CovariateScaleModel, a Bernoulli-Gaussian
// signal x0, and y = F x0 + xi with xi ~ N(0, sigma_xi^2 I).
//
// Every random component draws from its own substream of the instance seed
// (see rng.hpp), so identical (seed, params) yield bit-identical instances.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "hetlasso/rng.hpp"
#include "hetlasso/types.hpp"

namespace hetlasso {

// i.i.d. draws of the covariate scales. UniformUnit samples (0,1] exactly
// (the underlying uniform never returns 0); Explicit resamples the provided
// list with replacement.
inline Eigen::VectorXd sample_scales(const CovariateScaleModel& model, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_scales: n must be >= 1");
  Rng rng = Rng::substream(seed, StreamTag::kScales);
  Eigen::VectorXd v(n);
  model.visit([&](const auto& m) {
    using T = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<T, CovariateScaleModel::ConstantOne>) {
      v.setOnes();
    } else if constexpr (std::is_same_v<T, CovariateScaleModel::UniformUnit>) {
      for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform_unit();
    } else if constexpr (std::is_same_v<T, CovariateScaleModel::LogNormal>) {
      for (Eigen::Index i = 0; i < n; ++i) v[i] = std::exp(m.mu_log + m.sigma_log * rng.gaussian());
    } else {
      const auto size = static_cast<std::uint64_t>(m.samples.size());
      for (Eigen::Index i = 0; i < n; ++i) v[i] = m.samples[static_cast<std::size_t>(rng.next_u64() % size)];
    }
  });
  return v;
}

// Row count for a given sample ratio: round(alpha * n), ties to even.
inline Eigen::Index sample_count(double alpha, Eigen::Index n) {
  const double m = std::nearbyint(alpha * static_cast<double>(n));
  return static_cast<Eigen::Index>(m);
}

inline ProblemInstance generate_instance(const HyperParams& p, const CovariateScaleModel& model,
                                         Eigen::Index n, std::uint64_t seed) {
  require_valid(p);
  if (n < 1) throw std::invalid_argument("generate_instance: n must be >= 1");
  const Eigen::Index m = sample_count(p.alpha, n);
  if (m < 1) throw std::invalid_argument("generate_instance: round(alpha * n) must be >= 1");

  ProblemInstance inst;
  inst.seed = seed;
  inst.sigma_xi = p.sigma_xi;
  inst.v = sample_scales(model, n, seed);

  Rng design = Rng::substream(seed, StreamTag::kDesign);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  inst.F.resize(m, n);
  // Column-major fill: F = Ftilde * diag(v).
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) inst.F(i, j) = design.gaussian() * scale * inst.v[j];

  Rng signal = Rng::substream(seed, StreamTag::kSignal);
  inst.x0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inst.x0[i] = signal.uniform01() < p.rho ? signal.gaussian() : 0.0;

  Rng noise = Rng::substream(seed, StreamTag::kObsNoise);
  inst.y = inst.F * inst.x0;
  for (Eigen::Index i = 0; i < m; ++i) inst.y[i] += p.sigma_xi * noise.gaussian();

  inst.check();
  return inst;
}

}  // namespace hetlasso
