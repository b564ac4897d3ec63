#include "jrt/simulate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "jrt/math_util.hpp"

namespace jrt {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd normalized_positive(Eigen::VectorXd v) {
  // Divide out the geometric mean so the product is one.
  const double g = std::exp(v.array().log().mean());
  return v / g;
}

Eigen::MatrixXd default_time_scale(int n, int k) {
  Eigen::MatrixXd x(n, k);
  for (int j = 0; j < k; ++j) x.col(j).setConstant(static_cast<double>(j) / k);
  return x;
}

}  // namespace

double TrueParameters::rho() const {
  return sigma_p(0, 1) / std::sqrt(sigma_p(0, 0) * sigma_p(1, 1));
}

void fill_responses(const ItemBank& items, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& zeta, Eigen::MatrixXd* y, Eigen::MatrixXd* rt,
                    Rng& rng) {
  const Eigen::Index n = theta.size();
  const Eigen::Index k = items.size();
  y->resize(n, k);
  rt->resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const double p =
          response_probability(theta[i], items.a[j], items.b[j], items.c[j], false);
      (*y)(i, j) = rng.bernoulli(p) ? 1.0 : 0.0;
      const double mu = rt_mean(zeta[i], items.phi[j], items.lambda[j], false, false);
      (*rt)(i, j) = rng.normal(mu, std::sqrt(items.sigma2[j]));
    }
}

void fill_responses_quadratic(const ItemBank& items, const Eigen::VectorXd& theta,
                              const Eigen::MatrixXd& zeta_q, const Eigen::MatrixXd& x_time,
                              Eigen::MatrixXd* y, Eigen::MatrixXd* rt, Rng& rng) {
  const Eigen::Index n = theta.size();
  const Eigen::Index k = items.size();
  y->resize(n, k);
  rt->resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const double p =
          response_probability(theta[i], items.a[j], items.b[j], items.c[j], false);
      (*y)(i, j) = rng.bernoulli(p) ? 1.0 : 0.0;
      const double x = x_time(i, j);
      const double speed = zeta_q(i, 0) + zeta_q(i, 1) * x + zeta_q(i, 2) * x * x;
      const double mu = items.lambda[j] - items.phi[j] * speed;
      (*rt)(i, j) = rng.normal(mu, std::sqrt(items.sigma2[j]));
    }
}

Mask pretest_design(int n, int groups, int common_items, int block_items) {
  if (groups < 1 || n < groups) throw std::invalid_argument("pretest_design: bad group count");
  const int k = common_items + groups * block_items;
  Mask mask = Mask::Zero(n, k);
  mask.leftCols(common_items).setOnes();
  for (int i = 0; i < n; ++i) {
    const int g = std::min(groups - 1, i * groups / n);
    for (int j = 0; j < block_items; ++j) mask(i, common_items + g * block_items + j) = 1;
  }
  return mask;
}

TrueParameters draw_from_priors(int n, int k, const Priors& priors, SpeedModel model,
                                Rng& rng) {
  TrueParameters t;
  // Item population from the normal-inverse-Wishart hyperprior.
  t.sigma_i = rng.inv_wishart(priors.item.nu_i, priors.item.v_i);
  t.mu_i = rng.mvn(priors.item.mu_0, t.sigma_i / priors.item.kappa);

  t.items.a.resize(k);
  t.items.b.resize(k);
  t.items.phi.resize(k);
  t.items.lambda.resize(k);
  t.items.sigma2.resize(k);
  t.items.c = Eigen::VectorXd::Zero(k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v;
    do {
      v = rng.mvn(t.mu_i, t.sigma_i);
    } while (v[0] <= 0.0 || v[2] <= 0.0);
    t.items.a[j] = v[0];
    t.items.b[j] = v[1];
    t.items.phi[j] = v[2];
    t.items.lambda[j] = v[3];
    t.items.sigma2[j] = rng.inv_gamma(priors.item.sigma2_shape, priors.item.sigma2_scale);
  }

  const int dim = model == SpeedModel::kQuadratic ? 4 : 2;
  t.mu_p = Eigen::VectorXd::Zero(dim);
  t.sigma_p = rng.inv_wishart(priors.pop.nu_p, priors.pop.v_p);
  t.theta.resize(n);
  if (model == SpeedModel::kQuadratic) {
    t.zeta_q.resize(n, 3);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd v = rng.mvn(t.mu_p, t.sigma_p);
      t.theta[i] = v[0];
      t.zeta_q.row(i) = v.tail(3).transpose();
    }
  } else {
    t.zeta.resize(n);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd v = rng.mvn(t.mu_p, t.sigma_p);
      t.theta[i] = v[0];
      t.zeta[i] = v[1];
    }
  }
  return t;
}

SimResult simulate_dataset(const SimSpec& spec, Rng& rng) {
  if (spec.n < 2 || spec.k < 2) throw std::invalid_argument("simulate_dataset: n, k >= 2 required");
  const int n = spec.n;
  const int k = spec.k;
  SimResult out;
  TrueParameters& t = out.truth;

  if (spec.fixed_items) {
    t.items = *spec.fixed_items;
  } else {
    t.items.a.resize(k);
    t.items.b.resize(k);
    t.items.phi.resize(k);
    t.items.lambda.resize(k);
    t.items.sigma2.resize(k);
    t.items.c = Eigen::VectorXd::Zero(k);
    for (int j = 0; j < k; ++j) {
      t.items.a[j] = std::exp(rng.normal(0.0, spec.sd_log_a));
      t.items.b[j] = rng.normal(0.0, spec.sd_b);
      t.items.phi[j] = std::exp(rng.normal(0.0, spec.sd_log_phi));
      t.items.lambda[j] = rng.normal(spec.mean_lambda, spec.sd_lambda);
      t.items.sigma2[j] = spec.sigma2_min + (spec.sigma2_max - spec.sigma2_min) * rng.uniform();
      if (spec.guess) t.items.c[j] = rng.beta(20.0, 80.0);
    }
    if (spec.normalize_products) {
      t.items.a = normalized_positive(t.items.a);
      t.items.phi = normalized_positive(t.items.phi);
    }
    if (spec.center_b) t.items.b.array() -= t.items.b.mean();
    if (spec.center_lambda) t.items.lambda.array() -= t.items.lambda.mean();
  }
  t.mu_i << t.items.a.mean(), t.items.b.mean(), t.items.phi.mean(), t.items.lambda.mean();
  t.sigma_i.setZero();

  Eigen::MatrixXd y;
  Eigen::MatrixXd rt;
  if (spec.speed_model == SpeedModel::kQuadratic) {
    t.mu_p = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd sp(4, 4);
    sp.setZero();
    sp(0, 0) = spec.var_theta;
    for (int j = 0; j < 3; ++j) {
      sp(j + 1, j + 1) = spec.quad_var[j];
      sp(0, j + 1) = sp(j + 1, 0) = spec.theta_speed_cov[j];
    }
    t.sigma_p = sp;
    Eigen::LLT<Eigen::MatrixXd> llt(sp);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("simulate_dataset: person covariance not positive definite");
    t.theta.resize(n);
    t.zeta_q.resize(n, 3);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd v = rng.mvn(t.mu_p, sp);
      t.theta[i] = v[0];
      t.zeta_q.row(i) = v.tail(3).transpose();
    }
    const Eigen::MatrixXd x =
        spec.x_time.size() ? spec.x_time : default_time_scale(n, k);
    fill_responses_quadratic(t.items, t.theta, t.zeta_q, x, &y, &rt, rng);
  } else {
    t.mu_p = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd sp(2, 2);
    const double cov = spec.rho * std::sqrt(spec.var_theta * spec.var_zeta);
    sp << spec.var_theta, cov, cov, spec.var_zeta;
    t.sigma_p = sp;
    t.theta.resize(n);
    t.zeta.resize(n);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd v = rng.mvn(t.mu_p, sp);
      t.theta[i] = v[0];
      t.zeta[i] = v[1];
    }
    // response_probability already carries the guessing floor when c > 0.
    fill_responses(t.items, t.theta, t.zeta, &y, &rt, rng);
  }

  ObservedData data = ObservedData::from_matrices(std::move(y), std::move(rt));

  const MissingSpec& miss = spec.missing;
  if (miss.mbd.size()) {
    if (miss.mbd.rows() != n || miss.mbd.cols() != k)
      throw std::invalid_argument("simulate_dataset: MBD mask dimensions do not match");
    data.mbd_y = miss.mbd;
    data.mbd_t = miss.mbd;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j)
        if (!miss.mbd(i, j)) {
          data.y(i, j) = kNaN;
          data.rt(i, j) = kNaN;
        }
  }
  if (miss.mar_frac_y < 0.0 || miss.mar_frac_y >= 1.0 || miss.mar_frac_rt < 0.0 ||
      miss.mar_frac_rt >= 1.0)
    throw std::invalid_argument("simulate_dataset: MAR fractions must lie in [0, 1)");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      if (miss.mar_frac_y > 0.0 && data.mbd_y(i, j) && rng.bernoulli(miss.mar_frac_y))
        data.y(i, j) = kNaN;
      if (miss.mar_frac_rt > 0.0 && data.mbd_t(i, j) && rng.bernoulli(miss.mar_frac_rt))
        data.rt(i, j) = kNaN;
    }

  out.data = std::move(data);
  return out;
}

}  // namespace jrt
