#pragma once

// Reference convex solvers for the tilted LASSO objective
//
//   f(x) = 1/2 ||y - F x||^2 + lambda ||x||_1 + eta^T x.
//
// Two independent paths are provided: accelerated proximal gradient with a
// monotone restart (oracle_solve) and cyclic coordinate descent
// (oracle_solve_cd). AMP is validated only against their agreement.
// Correctness reference, not performance-tuned; intended for N <= 5000.

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

#include "hetlasso/kernels.hpp"
#include "hetlasso/types.hpp"

namespace hetlasso {

struct OracleResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;  // false carries the best iterate after max_iter
};

inline double objective_value(const ProblemInstance& inst, const NoiseRealization& eta, double lambda,
                              const Eigen::VectorXd& x) {
  if (x.size() != inst.n() || eta.eta.size() != inst.n())
    throw std::invalid_argument("objective_value: dimension mismatch");
  const Eigen::VectorXd r = inst.y - inst.F * x;
  return 0.5 * r.squaredNorm() + lambda * x.lpNorm<1>() + eta.eta.dot(x);
}

// Max over coordinates of the subgradient-condition violation:
// active i:   |col_i^T (F x - y) + eta_i + lambda sgn(x_i)|
// inactive i: max(0, |col_i^T (F x - y) + eta_i| - lambda).
inline double kkt_residual(const ProblemInstance& inst, const NoiseRealization& eta, double lambda,
                           const Eigen::VectorXd& x) {
  const Eigen::VectorXd grad = inst.F.transpose() * (inst.F * x - inst.y) + eta.eta;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double r = x[i] != 0.0 ? std::abs(grad[i] + lambda * (x[i] > 0.0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(grad[i]) - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

namespace detail {

// Largest eigenvalue of F^T F by power iteration.
inline double lipschitz_constant(const Eigen::MatrixXd& F) {
  Eigen::VectorXd z = Eigen::VectorXd::Ones(F.cols());
  z.normalize();
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w = F.transpose() * (F * z);
    const double norm = w.norm();
    if (norm == 0.0) return 1.0;
    w /= norm;
    const double next = (F * w).squaredNorm();
    if (std::abs(next - lam) <= 1e-12 * next && it > 8) return next;
    lam = next;
    z = w;
  }
  return lam;
}

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& u, double t) {
  return u.array().sign() * (u.array().abs() - t).max(0.0);
}

}  // namespace detail

// FISTA with step 1/L and a monotone restart: if acceleration overshoots
// (objective increases), the momentum is reset and the step retaken from the
// last accepted iterate, so the reported objective is non-increasing.
inline OracleResult oracle_solve(const ProblemInstance& inst, const NoiseRealization& eta, double lambda,
                                 double tol = 1e-10, int max_iter = 100000,
                                 std::vector<double>* objective_trace = nullptr) {
  if (!(tol > 0.0)) throw std::invalid_argument("oracle_solve: tol must be positive");
  // 1% headroom on the power-iteration estimate keeps the step valid.
  const double L = detail::lipschitz_constant(inst.F) * 1.01;
  const double step = 1.0 / L;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(inst.n());
  Eigen::VectorXd x_prev = x;
  double t_momentum = 1.0;
  double f_best = objective_value(inst, eta, lambda, x);

  OracleResult out;
  for (int it = 1; it <= max_iter; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    Eigen::VectorXd z = x + ((t_momentum - 1.0) / t_next) * (x - x_prev);
    Eigen::VectorXd grad = inst.F.transpose() * (inst.F * z - inst.y) + eta.eta;
    Eigen::VectorXd x_next = detail::soft_threshold(z - step * grad, lambda * step);
    double f_next = objective_value(inst, eta, lambda, x_next);
    if (f_next > f_best) {
      // restart from the best point without momentum
      grad = inst.F.transpose() * (inst.F * x - inst.y) + eta.eta;
      x_next = detail::soft_threshold(x - step * grad, lambda * step);
      f_next = objective_value(inst, eta, lambda, x_next);
      t_momentum = 1.0;
    } else {
      t_momentum = t_next;
    }
    x_prev = x;
    x = x_next;
    f_best = std::min(f_best, f_next);
    if (objective_trace != nullptr) objective_trace->push_back(f_next);
    out.iterations = it;

    if (it % 8 == 0 || it <= 2) {
      const double res = kkt_residual(inst, eta, lambda, x);
      if (res < tol) {
        out.x = x;
        out.objective = f_next;
        out.kkt_residual = res;
        out.converged = true;
        return out;
      }
    }
  }
  out.x = x;
  out.objective = objective_value(inst, eta, lambda, x);
  out.kkt_residual = kkt_residual(inst, eta, lambda, x);
  out.converged = false;
  return out;
}

// Cyclic coordinate descent with an incrementally maintained residual.
inline OracleResult oracle_solve_cd(const ProblemInstance& inst, const NoiseRealization& eta, double lambda,
                                    double tol = 1e-10, int max_iter = 100000) {
  if (!(tol > 0.0)) throw std::invalid_argument("oracle_solve_cd: tol must be positive");
  const Eigen::Index n = inst.n();
  Eigen::VectorXd col_sq(n);
  for (Eigen::Index j = 0; j < n; ++j) col_sq[j] = inst.F.col(j).squaredNorm();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd resid = inst.y;  // y - F x
  OracleResult out;
  for (int sweep = 1; sweep <= max_iter; ++sweep) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (col_sq[j] == 0.0) continue;
      const double rho_j = inst.F.col(j).dot(resid) + col_sq[j] * x[j] - eta.eta[j];
      const double x_new = soft_mean(1.0 / col_sq[j], rho_j / col_sq[j], lambda);
      const double delta = x_new - x[j];
      if (delta != 0.0) {
        resid -= delta * inst.F.col(j);
        x[j] = x_new;
      }
    }
    out.iterations = sweep;
    const double res = kkt_residual(inst, eta, lambda, x);
    if (res < tol) {
      out.x = x;
      out.objective = objective_value(inst, eta, lambda, x);
      out.kkt_residual = res;
      out.converged = true;
      return out;
    }
  }
  out.x = x;
  out.objective = objective_value(inst, eta, lambda, x);
  out.kkt_residual = kkt_residual(inst, eta, lambda, x);
  out.converged = false;
  return out;
}

}  // namespace hetlasso
