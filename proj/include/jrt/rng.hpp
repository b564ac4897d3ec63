#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace jrt {

// Deterministic random source. All transforms are implemented in-house so a
// given seed yields the same stream on every platform; std distributions are
// implementation-defined and would break the reproducibility contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform draw on (0, 1].
  double uniform();

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() <= p; }

  /// Gamma(shape, scale), scale = 1/rate.
  double gamma(double shape, double scale);

  /// Inverse-gamma with density ~ x^{-shape-1} exp(-scale / x).
  double inv_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

  double chi2(double df) { return 2.0 * gamma(0.5 * df, 1.0); }

  double beta(double a, double b);

  /// Normal(mean, sd) conditioned on the draw exceeding `lower`.
  double truncated_normal_lower(double mean, double sd, double lower);

  /// Normal(mean, sd) conditioned on the draw not exceeding `upper`.
  double truncated_normal_upper(double mean, double sd, double upper);

  Eigen::VectorXd mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

  /// Multivariate normal given the precision matrix (posterior form).
  Eigen::VectorXd mvn_precision(const Eigen::VectorXd& precision_times_mean,
                                const Eigen::MatrixXd& precision);

  Eigen::MatrixXd wishart(double df, const Eigen::MatrixXd& scale);
  Eigen::MatrixXd inv_wishart(double df, const Eigen::MatrixXd& scale);

 private:
  // Standard normal conditioned on X > a.
  double std_normal_lower_tail(double a);

  std::mt19937_64 eng_;
};

}  // namespace jrt
