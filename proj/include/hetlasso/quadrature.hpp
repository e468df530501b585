#pragma once

// Gaussian quadrature rules via Golub-Welsch (eigendecomposition of the
// Jacobi matrix). Orders up to a few hundred are accurate in double
// precision; rules are cached per order.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace hetlasso {

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

namespace detail {

inline QuadratureRule golub_welsch(const Eigen::VectorXd& off_diagonal, double mu0) {
  const auto n = off_diagonal.size() + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    jacobi(k, k + 1) = off_diagonal[k];
    jacobi(k + 1, k) = off_diagonal[k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadratureRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = mu0 * eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

template <class Maker>
const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache, std::mutex& mutex, int order,
                                  Maker&& make) {
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make(order)).first;
  return it->second;
}

}  // namespace detail

// Gauss-Hermite for weight exp(-x^2) on the real line (physicists'
// convention): integral f(x) exp(-x^2) dx ~= sum w_i f(x_i).
inline const QuadratureRule& gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, order, [](int n) {
    Eigen::VectorXd beta(n - 1);
    for (int k = 1; k < n; ++k) beta[k - 1] = std::sqrt(0.5 * k);
    return detail::golub_welsch(beta, std::sqrt(3.14159265358979323846));
  });
}

// Gauss-Legendre on [-1, 1].
inline const QuadratureRule& gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, order, [](int n) {
    Eigen::VectorXd beta(n - 1);
    for (int k = 1; k < n; ++k) beta[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    return detail::golub_welsch(beta, 2.0);
  });
}

// Nodes and weights for E[f(Z)], Z ~ N(0,1): x = sqrt(2) * hermite node,
// w = hermite weight / sqrt(pi).
inline QuadratureRule standard_normal_rule(int order) {
  const QuadratureRule& gh = gauss_hermite(order);
  QuadratureRule rule;
  rule.nodes = gh.nodes * std::sqrt(2.0);
  rule.weights = gh.weights / std::sqrt(3.14159265358979323846);
  return rule;
}

}  // namespace hetlasso
