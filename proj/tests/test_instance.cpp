#include <catch_amalgamated.hpp>

#include <cmath>

#include "hetlasso/instance.hpp"

using namespace hetlasso;

TEST_CASE("constant scales are exactly one") {
  const auto v = sample_scales(CovariateScaleModel::constant_one(), 5, 9);
  REQUIRE(v.size() == 5);
  REQUIRE((v.array() == 1.0).all());
}

TEST_CASE("uniform scales: support and second moment") {
  const auto v = sample_scales(CovariateScaleModel::uniform_unit(), 1000000, 123);
  REQUIRE((v.array() > 0.0).all());
  REQUIRE((v.array() <= 1.0).all());
  const double m2 = v.array().square().mean();
  REQUIRE(std::abs(m2 - 1.0 / 3.0) < 0.01 / 3.0);  // within 1%
}

TEST_CASE("lognormal scales second moment") {
  const auto v = sample_scales(CovariateScaleModel::log_normal(0.0, 0.5), 1000000, 321);
  const double m2 = v.array().square().mean();
  const double expected = std::exp(0.5);
  REQUIRE(std::abs(m2 - expected) < 0.02 * expected);  // within 2%
}

TEST_CASE("explicit scales resample the given list") {
  const auto v = sample_scales(CovariateScaleModel::explicit_samples({0.5, 1.5, 3.0}), 1000, 7);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    REQUIRE((v[i] == 0.5 || v[i] == 1.5 || v[i] == 3.0));
}

TEST_CASE("sample count rounds ties to even") {
  REQUIRE(sample_count(0.5, 4) == 2);
  REQUIRE(sample_count(0.5, 5) == 2);   // 2.5 -> 2
  REQUIRE(sample_count(0.5, 7) == 4);   // 3.5 -> 4
  REQUIRE(sample_count(2.0, 3) == 6);
}

TEST_CASE("generation is bit-reproducible from the seed") {
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.0};
  const auto a = generate_instance(p, CovariateScaleModel::uniform_unit(), 64, 555);
  const auto b = generate_instance(p, CovariateScaleModel::uniform_unit(), 64, 555);
  REQUIRE(a.F == b.F);
  REQUIRE(a.y == b.y);
  REQUIRE(a.x0 == b.x0);
  REQUIRE(a.v == b.v);
  const auto c = generate_instance(p, CovariateScaleModel::uniform_unit(), 64, 556);
  REQUIRE(a.F != c.F);
}

TEST_CASE("noiseless dense case: y equals F x0 exactly") {
  HyperParams p{0.5, 1.0, 0.0, 1.0, 0.0};
  const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), 50, 77);
  REQUIRE((inst.x0.array() != 0.0).all());
  REQUIRE(inst.y == inst.F * inst.x0);
}

TEST_CASE("signal density concentrates at rho") {
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.0};
  const Eigen::Index n = 10000;
  const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), n, 2024);
  const double frac = static_cast<double>((inst.x0.array() != 0.0).count()) / static_cast<double>(n);
  const double sd = std::sqrt(0.1 * 0.9 / static_cast<double>(n));
  REQUIRE(std::abs(frac - 0.1) < 3.0 * sd);
}

TEST_CASE("column second moments follow the scales") {
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.0};
  const Eigen::Index n = 2000;
  const auto inst = generate_instance(p, CovariateScaleModel::uniform_unit(), n, 31337);
  const double m = static_cast<double>(inst.m());
  double ratio_sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double col_moment = inst.F.col(j).squaredNorm() / m;  // ~ v_j^2 / N
    const double expected = inst.v[j] * inst.v[j] / static_cast<double>(n);
    const double ratio = col_moment / expected;
    ratio_sum += ratio;
    REQUIRE(ratio == Catch::Approx(1.0).margin(0.35));  // per-column ~ chi^2_M / M
  }
  REQUIRE(ratio_sum / static_cast<double>(n) == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("Gram diagonal concentrates at alpha * v_i^2") {
  // With Ftilde ~ N(0, 1/N) and M = alpha N, (F^T F)_ii ~ alpha v_i^2; the
  // measured diagonal carries the alpha factor.
  HyperParams p{0.5, 0.1, 0.1, 1.0, 0.0};
  const auto inst = generate_instance(p, CovariateScaleModel::constant_one(), 4000, 99);
  const double mean_diag = (inst.F.transpose() * inst.F).diagonal().mean();
  INFO("measured mean Gram diagonal = " << mean_diag << " (alpha = 0.5)");
  REQUIRE(mean_diag == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("dimension error when round(alpha * n) < 1") {
  HyperParams p{0.1, 0.1, 0.1, 1.0, 0.0};
  REQUIRE_THROWS_AS(generate_instance(p, CovariateScaleModel::uniform_unit(), 4, 1),
                    std::invalid_argument);
}
