#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "hetlasso/instance.hpp"
#include "hetlasso/oracle.hpp"
#include "hetlasso/perturbation.hpp"

using namespace hetlasso;

namespace {

ProblemInstance scalar_instance(double y_value) {
  ProblemInstance inst;
  inst.F = Eigen::MatrixXd::Identity(1, 1);
  inst.y = Eigen::VectorXd::Constant(1, y_value);
  inst.x0 = Eigen::VectorXd::Zero(1);
  inst.v = Eigen::VectorXd::Ones(1);
  return inst;
}

NoiseRealization fixed_eta(const Eigen::VectorXd& eta) {
  NoiseRealization noise;
  noise.eta = eta;
  noise.variances = Eigen::VectorXd::Zero(eta.size());
  noise.scheme = PerturbationScheme::isotropic(0.0);
  return noise;
}

}  // namespace

TEST_CASE("scalar problems have closed-form solutions") {
  const auto inst = scalar_instance(2.0);
  const auto zero = fixed_eta(Eigen::VectorXd::Zero(1));
  const auto res = oracle_solve(inst, zero, 1.0, 1e-12);
  REQUIRE(res.converged);
  REQUIRE(res.x[0] == Catch::Approx(1.0).margin(1e-10));

  Eigen::VectorXd tilt(1);
  tilt << 0.5;
  const auto res2 = oracle_solve(inst, fixed_eta(tilt), 1.0, 1e-12);
  REQUIRE(res2.x[0] == Catch::Approx(0.5).margin(1e-10));  // x = S(y - eta; lambda)
}

TEST_CASE("objective values at reference points") {
  HyperParams p{0.5, 1.0, 0.0, 1.0, 0.0};
  const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 40, 4);
  const auto zero = fixed_eta(Eigen::VectorXd::Zero(inst.n()));
  REQUIRE(objective_value(inst, zero, 1.0, Eigen::VectorXd::Zero(inst.n())) ==
          Catch::Approx(0.5 * inst.y.squaredNorm()).epsilon(1e-14));
  // noiseless exact fit: residual vanishes at x0
  REQUIRE(objective_value(inst, zero, 0.7, inst.x0) ==
          Catch::Approx(0.7 * inst.x0.lpNorm<1>()).epsilon(1e-12));
}

TEST_CASE("proximal gradient and coordinate descent agree") {
  for (int c = 0; c < 6; ++c) {
    HyperParams p;
    p.alpha = c % 2 == 0 ? 0.5 : 2.0;
    p.lambda = c < 3 ? 0.05 : 0.4;
    p.sigma_eta_bar_sq = 0.003;
    const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 100, 700 + c);
    const auto eta = draw_eta(PerturbationScheme::gram_based(p.sigma_eta_bar_sq), inst.v, 31 + c);
    const auto a = oracle_solve(inst, eta, p.lambda, 1e-11);
    const auto b = oracle_solve_cd(inst, eta, p.lambda, 1e-11);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    REQUIRE(a.kkt_residual < 1e-11);
    REQUIRE(b.kkt_residual < 1e-11);
    REQUIRE(std::abs(a.objective - b.objective) < 1e-10 * std::max(1.0, std::abs(a.objective)));
  }
}

TEST_CASE("objective is non-increasing across iterations") {
  HyperParams p{0.5, 0.3, 0.1, 0.1, 0.0};
  const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 150, 17);
  const auto zero = fixed_eta(Eigen::VectorXd::Zero(inst.n()));
  std::vector<double> trace;
  oracle_solve(inst, zero, 0.05, 1e-10, 100000, &trace);
  REQUIRE(trace.size() > 3);
  for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("solution is invariant under coordinate permutation") {
  HyperParams p{2.0, 0.3, 0.05, 0.1, 0.0};
  const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 60, 21);
  Eigen::VectorXd eta_vec(inst.n());
  Rng rng(3);
  for (Eigen::Index i = 0; i < inst.n(); ++i) eta_vec[i] = 0.05 * rng.gaussian();

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(inst.n()));
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[17]);

  ProblemInstance permuted = inst;
  Eigen::VectorXd eta_perm(inst.n());
  for (Eigen::Index j = 0; j < inst.n(); ++j) {
    permuted.F.col(j) = inst.F.col(perm[static_cast<std::size_t>(j)]);
    permuted.v[j] = inst.v[perm[static_cast<std::size_t>(j)]];
    permuted.x0[j] = inst.x0[perm[static_cast<std::size_t>(j)]];
    eta_perm[j] = eta_vec[perm[static_cast<std::size_t>(j)]];
  }

  const auto base = oracle_solve(inst, fixed_eta(eta_vec), 0.1, 1e-11);
  const auto perm_res = oracle_solve(permuted, fixed_eta(eta_perm), 0.1, 1e-11);
  for (Eigen::Index j = 0; j < inst.n(); ++j)
    REQUIRE(perm_res.x[j] == Catch::Approx(base.x[perm[static_cast<std::size_t>(j)]]).margin(1e-7));
}

TEST_CASE("max-iteration result carries the best iterate and residual") {
  HyperParams p{0.5, 0.3, 0.1, 0.05, 0.0};
  const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 100, 5);
  const auto zero = fixed_eta(Eigen::VectorXd::Zero(inst.n()));
  const auto res = oracle_solve(inst, zero, 0.02, 1e-14, 3);
  REQUIRE_FALSE(res.converged);
  REQUIRE(res.iterations == 3);
  REQUIRE(res.x.size() == inst.n());
  REQUIRE(res.kkt_residual > 0.0);
}

TEST_CASE("kkt residual flags violated stationarity") {
  const auto inst = scalar_instance(2.0);
  const auto zero = fixed_eta(Eigen::VectorXd::Zero(1));
  Eigen::VectorXd wrong(1);
  wrong << 0.2;  // true solution is 1.0
  REQUIRE(kkt_residual(inst, zero, 1.0, wrong) > 0.5);
  Eigen::VectorXd right(1);
  right << 1.0;
  REQUIRE(kkt_residual(inst, zero, 1.0, right) < 1e-12);
}
