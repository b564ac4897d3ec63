#include "jrt/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "jrt/math_util.hpp"

namespace jrt {

double Rng::uniform() {
  // 53-bit mantissa from the top bits; in (0, 1].
  const std::uint64_t r = eng_();
  return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::normal() {
  // Box-Muller; no caching so the draw count per call is fixed.
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * math::kPi * u2);
}

double Rng::gamma(double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0) throw std::domain_error("Rng::gamma: nonpositive parameter");
  if (shape < 1.0) {
    // Boost to shape + 1, then apply the power correction.
    const double g = gamma(shape + 1.0, scale);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

double Rng::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

double Rng::std_normal_lower_tail(double a) {
  if (a <= 0.0) {
    // Acceptance probability >= 1/2: plain rejection.
    for (;;) {
      const double x = normal();
      if (x > a) return x;
    }
  }
  if (a <= 6.0) {
    // Exponential proposal shifted to a (Robert, 1995).
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double x = a - std::log(uniform()) / alpha;
      const double d = x - alpha;
      if (std::log(uniform()) <= -0.5 * d * d) return x;
    }
  }
  // Deep tail: inverse CDF on the complementary scale.
  const double tail = math::normal_cdf(-a);
  const double q = tail * uniform();
  return -math::normal_quantile(q);
}

double Rng::truncated_normal_lower(double mean, double sd, double lower) {
  return mean + sd * std_normal_lower_tail((lower - mean) / sd);
}

double Rng::truncated_normal_upper(double mean, double sd, double upper) {
  return mean - sd * std_normal_lower_tail((mean - upper) / sd);
}

Eigen::VectorXd Rng::mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("Rng::mvn: covariance not positive definite");
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal();
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd Rng::mvn_precision(const Eigen::VectorXd& precision_times_mean,
                                   const Eigen::MatrixXd& precision) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("Rng::mvn_precision: precision not positive definite");
  const Eigen::VectorXd mean = llt.solve(precision_times_mean);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal();
  // x = mean + L^{-T} z has covariance (L L^T)^{-1}.
  return mean + llt.matrixU().solve(z);
}

Eigen::MatrixXd Rng::wishart(double df, const Eigen::MatrixXd& scale) {
  const Eigen::Index p = scale.rows();
  if (df <= static_cast<double>(p) - 1.0)
    throw std::domain_error("Rng::wishart: df too small");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("Rng::wishart: scale not positive definite");
  // Bartlett decomposition.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    A(i, i) = std::sqrt(chi2(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = normal();
  }
  const Eigen::MatrixXd LA = llt.matrixL() * A;
  return LA * LA.transpose();
}

Eigen::MatrixXd Rng::inv_wishart(double df, const Eigen::MatrixXd& scale) {
  Eigen::MatrixXd scale_inv = scale.inverse();
  scale_inv = 0.5 * (scale_inv + scale_inv.transpose()).eval();
  const Eigen::MatrixXd W = wishart(df, scale_inv);
  Eigen::MatrixXd out = W.inverse();
  return 0.5 * (out + out.transpose()).eval();
}

}  // namespace jrt
