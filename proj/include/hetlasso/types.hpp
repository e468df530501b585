#pragma once

// Shared domain types. These are immutable value objects after construction;
// they validate their own invariants and carry no computation beyond that.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hetlasso {

// Model hyperparameters. `sigma_eta_bar_sq` is the target average
// perturbation variance: the per-coordinate variances of any allocation
// scheme sum to N times this value.
struct HyperParams {
  double alpha = 0.5;             // sample ratio M/N, > 0
  double rho = 0.1;               // signal density, in (0, 1]
  double sigma_xi = 0.1;          // observation noise std dev, >= 0
  double lambda = 1.0;            // l1 weight, > 0
  double sigma_eta_bar_sq = 0.0;  // average perturbation variance, >= 0
};

// Returns every violated invariant; empty means the parameters are valid.
inline std::vector<std::string> validate_params(const HyperParams& p) {
  std::vector<std::string> violations;
  auto finite = [](double x) { return std::isfinite(x); };
  if (!finite(p.alpha) || p.alpha <= 0.0) violations.push_back("alpha must be positive and finite");
  if (!finite(p.rho) || p.rho <= 0.0 || p.rho > 1.0) violations.push_back("rho out of range (0,1]");
  if (!finite(p.sigma_xi) || p.sigma_xi < 0.0) violations.push_back("sigma_xi must be nonnegative and finite");
  if (!finite(p.lambda) || p.lambda <= 0.0) violations.push_back("lambda must be positive");
  if (!finite(p.sigma_eta_bar_sq) || p.sigma_eta_bar_sq < 0.0)
    violations.push_back("sigma_eta_bar_sq must be nonnegative and finite");
  return violations;
}

// Engine-side validation. Unlike validate_params this accepts rho == 0, the
// degenerate all-zero-signal case used by diagnostics and trivial fixed
// points.
inline void require_valid(const HyperParams& p) {
  HyperParams q = p;
  if (q.rho == 0.0) q.rho = 1.0;
  auto v = validate_params(q);
  if (p.rho < 0.0 || p.rho > 1.0 || !std::isfinite(p.rho)) v.push_back("rho out of range [0,1]");
  if (!v.empty()) {
    std::ostringstream os;
    os << "invalid hyperparameters:";
    for (const auto& s : v) os << " [" << s << "]";
    throw std::invalid_argument(os.str());
  }
}

// Distribution of the per-coordinate covariate scales v_i.
class CovariateScaleModel {
 public:
  struct ConstantOne {};
  struct UniformUnit {};  // uniform on (0, 1]
  struct LogNormal {
    double mu_log;
    double sigma_log;
  };
  struct Explicit {
    std::vector<double> samples;
  };

  static CovariateScaleModel constant_one() { return CovariateScaleModel(ConstantOne{}); }
  static CovariateScaleModel uniform_unit() { return CovariateScaleModel(UniformUnit{}); }

  static CovariateScaleModel log_normal(double mu_log, double sigma_log) {
    if (!(std::isfinite(mu_log) && std::isfinite(sigma_log)) || sigma_log <= 0.0)
      throw std::invalid_argument("log_normal: sigma_log must be positive and finite");
    return CovariateScaleModel(LogNormal{mu_log, sigma_log});
  }

  static CovariateScaleModel explicit_samples(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("explicit_samples: empty sample list");
    for (double s : samples)
      if (!(std::isfinite(s) && s > 0.0))
        throw std::invalid_argument("explicit_samples: all samples must be positive and finite");
    return CovariateScaleModel(Explicit{std::move(samples)});
  }

  template <class Visitor>
  decltype(auto) visit(Visitor&& vis) const {
    return std::visit(std::forward<Visitor>(vis), variant_);
  }

  bool is_constant_one() const { return std::holds_alternative<ConstantOne>(variant_); }

  // Population second moment E[v^2]; finite by construction for the
  // parametric variants, the empirical mean of squares for Explicit.
  double second_moment() const {
    return visit([](const auto& m) -> double {
      using T = std::decay_t<decltype(m)>;
      if constexpr (std::is_same_v<T, ConstantOne>) {
        return 1.0;
      } else if constexpr (std::is_same_v<T, UniformUnit>) {
        return 1.0 / 3.0;
      } else if constexpr (std::is_same_v<T, LogNormal>) {
        return std::exp(2.0 * m.mu_log + 2.0 * m.sigma_log * m.sigma_log);
      } else {
        double acc = 0.0;
        for (double s : m.samples) acc += s * s;
        return acc / static_cast<double>(m.samples.size());
      }
    });
  }

  std::string name() const {
    return visit([](const auto& m) -> std::string {
      using T = std::decay_t<decltype(m)>;
      if constexpr (std::is_same_v<T, ConstantOne>) {
        return "constant_one";
      } else if constexpr (std::is_same_v<T, UniformUnit>) {
        return "uniform_unit";
      } else if constexpr (std::is_same_v<T, LogNormal>) {
        std::ostringstream os;
        os << "lognormal(" << m.mu_log << "," << m.sigma_log << ")";
        return os.str();
      } else {
        std::ostringstream os;
        os << "explicit(n=" << m.samples.size() << ")";
        return os.str();
      }
    });
  }

 private:
  using Variant = std::variant<ConstantOne, UniformUnit, LogNormal, Explicit>;
  explicit CovariateScaleModel(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

enum class PerturbationKind { kIsotropic, kGramBased };

inline const char* to_string(PerturbationKind k) {
  return k == PerturbationKind::kIsotropic ? "isotropic" : "gram";
}

// Noise-variance allocation rule plus the average variance budget.
struct PerturbationScheme {
  PerturbationKind kind = PerturbationKind::kIsotropic;
  double sigma_eta_bar_sq = 0.0;

  static PerturbationScheme isotropic(double sigma_eta_bar_sq) {
    return make(PerturbationKind::kIsotropic, sigma_eta_bar_sq);
  }
  static PerturbationScheme gram_based(double sigma_eta_bar_sq) {
    return make(PerturbationKind::kGramBased, sigma_eta_bar_sq);
  }

 private:
  static PerturbationScheme make(PerturbationKind k, double s2) {
    if (!std::isfinite(s2) || s2 < 0.0)
      throw std::invalid_argument("PerturbationScheme: sigma_eta_bar_sq must be nonnegative");
    return PerturbationScheme{k, s2};
  }
};

// One synthetic dataset. F has M rows and N columns, column i scaled by v_i.
struct ProblemInstance {
  Eigen::MatrixXd F;
  Eigen::VectorXd y;
  Eigen::VectorXd x0;
  Eigen::VectorXd v;
  double sigma_xi = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index m() const { return F.rows(); }
  Eigen::Index n() const { return F.cols(); }

  void check() const {
    if (y.size() != F.rows() || x0.size() != F.cols() || v.size() != F.cols())
      throw std::invalid_argument("ProblemInstance: inconsistent dimensions");
    if (!(F.allFinite() && y.allFinite() && x0.allFinite() && v.allFinite()))
      throw std::invalid_argument("ProblemInstance: non-finite entries");
    if ((v.array() <= 0.0).any()) throw std::invalid_argument("ProblemInstance: scales must be positive");
  }
};

// A drawn perturbation vector together with the per-coordinate variances it
// was drawn from. Budget conservation (sum of variances == N * sigma_bar_sq
// within 1e-12 relative) is checked at construction time via `check`.
struct NoiseRealization {
  Eigen::VectorXd eta;
  Eigen::VectorXd variances;
  PerturbationScheme scheme;

  void check() const {
    if (eta.size() != variances.size()) throw std::invalid_argument("NoiseRealization: length mismatch");
    if ((variances.array() < 0.0).any()) throw std::invalid_argument("NoiseRealization: negative variance");
    const double target = static_cast<double>(variances.size()) * scheme.sigma_eta_bar_sq;
    const double total = variances.sum();
    const double tol = 1e-12 * std::max(1.0, std::abs(target));
    if (std::abs(total - target) > tol)
      throw std::invalid_argument("NoiseRealization: variance budget violated");
  }
};

}  // namespace hetlasso
