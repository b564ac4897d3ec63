#include "jrt/gibbs.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "jrt/math_util.hpp"

namespace jrt {

namespace {

constexpr int kPositivityRetries = 100;

struct ConditionalNormal {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Conditional of N(mu, sigma) on the `free` coordinates given the others.
ConditionalNormal mvn_conditional(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                  const std::vector<int>& free_idx,
                                  const std::vector<int>& given_idx,
                                  const Eigen::VectorXd& given_values) {
  const int nf = static_cast<int>(free_idx.size());
  const int ng = static_cast<int>(given_idx.size());
  ConditionalNormal out;
  out.mean.resize(nf);
  out.cov.resize(nf, nf);
  Eigen::MatrixXd s_ff(nf, nf), s_fg(nf, ng), s_gg(ng, ng);
  Eigen::VectorXd dev(ng);
  for (int r = 0; r < nf; ++r) {
    out.mean[r] = mu[free_idx[r]];
    for (int c = 0; c < nf; ++c) s_ff(r, c) = sigma(free_idx[r], free_idx[c]);
    for (int c = 0; c < ng; ++c) s_fg(r, c) = sigma(free_idx[r], given_idx[c]);
  }
  for (int r = 0; r < ng; ++r) {
    dev[r] = given_values[r] - mu[given_idx[r]];
    for (int c = 0; c < ng; ++c) s_gg(r, c) = sigma(given_idx[r], given_idx[c]);
  }
  if (ng == 0) {
    out.cov = s_ff;
    return out;
  }
  const Eigen::MatrixXd gain = s_fg * s_gg.inverse();
  out.mean += gain * dev;
  out.cov = s_ff - gain * s_fg.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

// Scalar conjugate-normal draw: prior N(m0, v0), likelihood contribution in
// precision form (like_prec = sum x^2 / s2, like_lin = sum x y / s2).
double draw_conjugate_scalar(double m0, double v0, double like_prec, double like_lin,
                             Rng& rng) {
  const double prec = 1.0 / v0 + like_prec;
  const double mean = (m0 / v0 + like_lin) / prec;
  return rng.normal(mean, std::sqrt(1.0 / prec));
}

// Bivariate normal draw restricted to coordinate 0 > 0. Rejection first; if
// the retry budget runs out (posterior mass concentrated below zero), switch
// to the exact decomposition: truncated marginal for coordinate 0, then the
// normal conditional for coordinate 1. Both routes sample the same law.
Eigen::Vector2d draw_positive_bivariate(const Eigen::Vector2d& lin, const Eigen::Matrix2d& prec,
                                        Rng& rng) {
  for (int tries = 0; tries < kPositivityRetries; ++tries) {
    const Eigen::VectorXd draw = rng.mvn_precision(lin, prec);
    if (draw[0] > 0.0) return draw;
  }
  const Eigen::Matrix2d cov = prec.inverse();
  const Eigen::Vector2d mean = cov * lin;
  const double a = rng.truncated_normal_lower(mean[0], std::sqrt(cov(0, 0)), 0.0);
  const double cond_mean = mean[1] + cov(0, 1) / cov(0, 0) * (a - mean[0]);
  const double cond_var = cov(1, 1) - cov(0, 1) * cov(0, 1) / cov(0, 0);
  return {a, rng.normal(cond_mean, std::sqrt(cond_var))};
}

// Scalar positive draw from N(mean, var) restricted to (0, inf).
double draw_positive_scalar(double mean, double var, Rng& rng) {
  return rng.truncated_normal_lower(mean, std::sqrt(var), 0.0);
}

double geometric_mean(const Eigen::VectorXd& v) {
  return std::exp(v.array().log().mean());
}

Eigen::VectorXd standardized(Eigen::VectorXd v) {
  const double mean = v.mean();
  v.array() -= mean;
  const double sd = std::sqrt(v.squaredNorm() / std::max<Eigen::Index>(1, v.size() - 1));
  if (sd > 0.0) v /= sd;
  return v;
}

}  // namespace

int ChainStore::burnin_draws() const {
  return static_cast<int>(std::ceil(config.burnin * config.xg / 100.0));
}

Eigen::VectorXd ChainStore::posterior_mean(const Eigen::MatrixXd& chain) const {
  const int b = burnin_draws();
  const Eigen::Index m = chain.rows() - b;
  return chain.bottomRows(m).colwise().mean();
}

Eigen::VectorXd ChainStore::posterior_sd(const Eigen::MatrixXd& chain) const {
  const int b = burnin_draws();
  const Eigen::Index m = chain.rows() - b;
  const Eigen::MatrixXd tail = chain.bottomRows(m);
  const Eigen::VectorXd mean = tail.colwise().mean();
  Eigen::VectorXd sd(chain.cols());
  for (Eigen::Index j = 0; j < chain.cols(); ++j) {
    const double ss = (tail.col(j).array() - mean[j]).square().sum();
    sd[j] = std::sqrt(ss / std::max<Eigen::Index>(1, m - 1));
  }
  return sd;
}

Eigen::MatrixXd ChainStore::person_posterior_mean() const {
  const bool quad = config.speed_model == SpeedModel::kQuadratic;
  Eigen::MatrixXd out(n, quad ? 4 : 2);
  out.col(0) = posterior_mean(theta);
  if (quad) {
    out.col(1) = posterior_mean(zeta0);
    out.col(2) = posterior_mean(zeta1);
    out.col(3) = posterior_mean(zeta2);
  } else {
    out.col(1) = posterior_mean(zeta);
  }
  return out;
}

Eigen::MatrixXd ChainStore::person_posterior_sd() const {
  const bool quad = config.speed_model == SpeedModel::kQuadratic;
  Eigen::MatrixXd out(n, quad ? 4 : 2);
  out.col(0) = posterior_sd(theta);
  if (quad) {
    out.col(1) = posterior_sd(zeta0);
    out.col(2) = posterior_sd(zeta1);
    out.col(3) = posterior_sd(zeta2);
  } else {
    out.col(1) = posterior_sd(zeta);
  }
  return out;
}

Eigen::MatrixXd time_scale(const Eigen::MatrixXi& order) {
  const Eigen::Index n = order.rows();
  const Eigen::Index k = order.cols();
  Eigen::MatrixXd x(n, k);
  std::vector<bool> seen(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(seen.begin(), seen.end(), false);
    for (Eigen::Index j = 0; j < k; ++j) {
      const int pos = order(i, j);
      if (pos < 1 || pos > k || seen[static_cast<std::size_t>(pos - 1)]) {
        std::ostringstream os;
        os << "time_scale: row " << i + 1 << " is not a permutation of 1.." << k;
        throw std::invalid_argument(os.str());
      }
      seen[static_cast<std::size_t>(pos - 1)] = true;
      x(i, j) = static_cast<double>(pos - 1) / static_cast<double>(k);
    }
  }
  return x;
}

GibbsSampler::GibbsSampler(const ObservedData& data, const RunConfig& config,
                           const Priors& priors)
    : data_(data), config_(config), priors_(priors) {
  n_ = data.n_persons();
  k_ = data.n_items();
  status_y_.resize(n_, k_);
  status_rt_.resize(n_, k_);
  for (Eigen::Index i = 0; i < n_; ++i)
    for (Eigen::Index j = 0; j < k_; ++j) {
      status_y_(i, j) = data.mbd_y(i, j) == 0 ? CellStatus::kMbd
                        : is_missing(data.y(i, j)) ? CellStatus::kMar
                                                   : CellStatus::kObserved;
      status_rt_(i, j) = data.mbd_t(i, j) == 0 ? CellStatus::kMbd
                         : is_missing(data.rt(i, j)) ? CellStatus::kMar
                                                     : CellStatus::kObserved;
    }
  if (config_.speed_model == SpeedModel::kQuadratic) {
    x_time_.resize(n_, k_);
    for (Eigen::Index j = 0; j < k_; ++j)
      x_time_.col(j).setConstant(static_cast<double>(j) / static_cast<double>(k_));
  }
}

void GibbsSampler::set_time_scale(const Eigen::MatrixXd& x_time) {
  if (x_time.rows() != n_ || x_time.cols() != k_)
    throw std::invalid_argument("set_time_scale: dimensions do not match the data");
  x_time_ = x_time;
}

double GibbsSampler::speed_value(Eigen::Index i, Eigen::Index j) const {
  if (config_.speed_model == SpeedModel::kQuadratic) {
    const double x = x_time_(i, j);
    return state_.persons.zeta_q(i, 0) + state_.persons.zeta_q(i, 1) * x +
           state_.persons.zeta_q(i, 2) * x * x;
  }
  return state_.persons.zeta[i];
}

double GibbsSampler::ra_eta(Eigen::Index i, Eigen::Index j) const {
  return ra_linear_predictor(state_.persons.theta[i], state_.items.a[j], state_.items.b[j],
                             config_.par1);
}

double GibbsSampler::rt_mu(Eigen::Index i, Eigen::Index j) const {
  return rt_mean(speed_value(i, j), state_.items.phi[j], state_.items.lambda[j],
                 config_.par1, config_.wl);
}

Eigen::VectorXd GibbsSampler::person_prior_mean(Eigen::Index i) const {
  Eigen::VectorXd m = state_.mu_p;
  if (data_.xpa.size() && state_.beta_theta.size())
    m[0] += data_.xpa.row(i) * state_.beta_theta;
  if (data_.xpt.size() && state_.beta_zeta.size())
    m[1] += data_.xpt.row(i) * state_.beta_zeta;
  return m;
}

Eigen::Vector4d GibbsSampler::item_prior_mean(Eigen::Index j) const {
  Eigen::Vector4d m = state_.mu_i;
  if (data_.xia.size() && state_.beta_b.size()) m[1] = data_.xia.row(j) * state_.beta_b;
  if (data_.xit.size() && state_.beta_lambda.size())
    m[3] = data_.xit.row(j) * state_.beta_lambda;
  return m;
}

void GibbsSampler::initialize(Rng& rng) {
  const auto& ip = priors_.item;
  state_.items.a = config_.fixed_a ? *config_.fixed_a : Eigen::VectorXd::Constant(k_, ip.mu_0[0]);
  state_.items.b = config_.fixed_b ? *config_.fixed_b : Eigen::VectorXd::Constant(k_, ip.mu_0[1]);
  state_.items.lambda =
      config_.fixed_lambda ? *config_.fixed_lambda : Eigen::VectorXd::Constant(k_, ip.mu_0[3]);
  state_.items.sigma2 = Eigen::VectorXd::Ones(k_);
  if (!config_.td || config_.wl)
    state_.items.phi = Eigen::VectorXd::Ones(k_);
  else
    state_.items.phi =
        config_.fixed_phi ? *config_.fixed_phi : Eigen::VectorXd::Constant(k_, ip.mu_0[2]);
  state_.items.c = config_.guess
                       ? Eigen::VectorXd::Constant(k_, ip.guess_alpha / (ip.guess_alpha + ip.guess_beta))
                       : Eigen::VectorXd::Zero(k_);

  // Standardized row scores as starting values for the person parameters.
  Eigen::VectorXd prop(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    double sum = 0.0;
    int cnt = 0;
    for (Eigen::Index j = 0; j < k_; ++j)
      if (status_y_(i, j) == CellStatus::kObserved) {
        sum += data_.y(i, j);
        ++cnt;
      }
    prop[i] = cnt ? sum / cnt : 0.5;
  }
  state_.persons.theta = standardized(prop);

  Eigen::VectorXd col_mean(k_);
  for (Eigen::Index j = 0; j < k_; ++j) {
    double sum = 0.0;
    int cnt = 0;
    for (Eigen::Index i = 0; i < n_; ++i)
      if (status_rt_(i, j) == CellStatus::kObserved) {
        sum += data_.rt(i, j);
        ++cnt;
      }
    col_mean[j] = cnt ? sum / cnt : 0.0;
  }
  Eigen::VectorXd slow(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    double sum = 0.0;
    int cnt = 0;
    for (Eigen::Index j = 0; j < k_; ++j)
      if (status_rt_(i, j) == CellStatus::kObserved) {
        sum += data_.rt(i, j) - col_mean[j];
        ++cnt;
      }
    slow[i] = cnt ? sum / cnt : 0.0;
  }
  const Eigen::VectorXd speed0 = -standardized(slow);
  if (config_.speed_model == SpeedModel::kQuadratic) {
    state_.persons.zeta_q = Eigen::MatrixXd::Zero(n_, 3);
    state_.persons.zeta_q.col(0) = speed0;
  } else {
    state_.persons.zeta = speed0;
  }
  state_.persons.s = Mask::Ones(n_, k_);

  const int dim = person_dim();
  state_.mu_p = Eigen::VectorXd::Zero(dim);
  state_.sigma_p = priors_.pop.sigma_p;
  if (state_.sigma_p.rows() != dim)
    throw std::invalid_argument("population prior dimension does not match the speed model");
  state_.beta_theta = Eigen::VectorXd::Zero(data_.xpa.cols());
  state_.beta_zeta = Eigen::VectorXd::Zero(data_.xpt.cols());
  state_.quad_var = Eigen::Vector3d::Constant(0.1);
  state_.theta_on_speed.setZero();
  state_.theta_resid_var = 1.0;
  if (config_.speed_model == SpeedModel::kQuadratic) rebuild_sigma_p_from_pieces();

  state_.mu_i = priors_.item.mu_i;
  state_.sigma_i = priors_.item.sigma_i;
  state_.beta_b = Eigen::VectorXd::Zero(data_.xia.cols());
  state_.beta_lambda = Eigen::VectorXd::Zero(data_.xit.cols());

  state_.z = Eigen::MatrixXd::Zero(n_, k_);
  state_.y_work = data_.y;
  state_.rt_work = data_.rt;
  // Seed the missing-at-random cells; the per-sweep imputation step refreshes
  // them from the model.
  for (Eigen::Index i = 0; i < n_; ++i)
    for (Eigen::Index j = 0; j < k_; ++j) {
      if (status_y_(i, j) == CellStatus::kMar) state_.y_work(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      if (status_rt_(i, j) == CellStatus::kMar)
        state_.rt_work(i, j) = rng.normal(col_mean[j], 1.0);
    }
  initialized_ = true;
}

void GibbsSampler::set_responses(const Eigen::MatrixXd& y, const Eigen::MatrixXd& rt) {
  state_.y_work = y;
  state_.rt_work = rt;
}

void GibbsSampler::augment_latent_responses(Rng& rng) {
  for (Eigen::Index i = 0; i < n_; ++i)
    for (Eigen::Index j = 0; j < k_; ++j) {
      if (status_y_(i, j) == CellStatus::kMbd) continue;
      const double eta = ra_eta(i, j);
      if (config_.guess && state_.persons.s(i, j) == 0) {
        state_.z(i, j) = rng.normal(eta, 1.0);
      } else if (state_.y_work(i, j) == 1.0) {
        state_.z(i, j) = rng.truncated_normal_lower(eta, 1.0, 0.0);
      } else {
        state_.z(i, j) = rng.truncated_normal_upper(eta, 1.0, 0.0);
      }
    }
}

void GibbsSampler::sample_guessing(Rng& rng) {
  if (!config_.guess) return;
  for (Eigen::Index j = 0; j < k_; ++j) {
    double n_guessed = 0.0;
    double n_genuine = 0.0;
    const double c = state_.items.c[j];
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (status_y_(i, j) == CellStatus::kMbd) continue;
      auto& s = state_.persons.s(i, j);
      if (state_.y_work(i, j) == 1.0) {
        const double eta = ra_eta(i, j);
        const double genuine = (1.0 - c) * math::normal_cdf(eta);
        s = rng.bernoulli(genuine / (genuine + c)) ? 1 : 0;
        // Redraw the latent response under the new classification so the
        // (S, z) pair is a joint draw from its conditional.
        state_.z(i, j) = s ? rng.truncated_normal_lower(eta, 1.0, 0.0) : rng.normal(eta, 1.0);
      } else {
        s = 1;
      }
      s ? ++n_genuine : ++n_guessed;
    }
    state_.items.c[j] =
        rng.beta(priors_.item.guess_alpha + n_guessed, priors_.item.guess_beta + n_genuine);
  }
}

void GibbsSampler::sample_item_ra_params(Rng& rng) {
  const bool fix_a = config_.fixed_a.has_value();
  const bool fix_b = config_.fixed_b.has_value();
  if (fix_a && fix_b) return;
  for (Eigen::Index j = 0; j < k_; ++j) {
    const Eigen::Vector4d mu = item_prior_mean(j);
    double& a = state_.items.a[j];
    double& b = state_.items.b[j];

    if (!fix_a && !fix_b && !config_.par1) {
      // Joint bivariate conditional: z = a*theta - b + e, e ~ N(0,1).
      const ConditionalNormal prior = mvn_conditional(
          mu, state_.sigma_i, {0, 1}, {2, 3},
          Eigen::Vector2d(state_.items.phi[j], state_.items.lambda[j]));
      Eigen::Matrix2d prec = prior.cov.inverse();
      Eigen::Vector2d lin = prec * prior.mean;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (status_y_(i, j) == CellStatus::kMbd) continue;
        const Eigen::Vector2d x(state_.persons.theta[i], -1.0);
        prec += x * x.transpose();
        lin += x * state_.z(i, j);
      }
      const Eigen::Vector2d draw = draw_positive_bivariate(lin, prec, rng);
      a = draw[0];
      b = draw[1];
      continue;
    }

    // Scalar steps (bracket parameterization or one side frozen).
    if (!fix_a) {
      const ConditionalNormal prior = mvn_conditional(
          mu, state_.sigma_i, {0}, {1, 2, 3},
          Eigen::Vector3d(b, state_.items.phi[j], state_.items.lambda[j]));
      double lp = 0.0;
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (status_y_(i, j) == CellStatus::kMbd) continue;
        // par1: z = a (theta - b); otherwise z + b = a theta.
        const double x = config_.par1 ? state_.persons.theta[i] - b : state_.persons.theta[i];
        const double obs = config_.par1 ? state_.z(i, j) : state_.z(i, j) + b;
        lp += x * x;
        ll += x * obs;
      }
      const double prec = 1.0 / prior.cov(0, 0) + lp;
      const double mean = (prior.mean[0] / prior.cov(0, 0) + ll) / prec;
      a = draw_positive_scalar(mean, 1.0 / prec, rng);
    }
    if (!fix_b) {
      const ConditionalNormal prior = mvn_conditional(
          mu, state_.sigma_i, {1}, {0, 2, 3},
          Eigen::Vector3d(a, state_.items.phi[j], state_.items.lambda[j]));
      double lp = 0.0;
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (status_y_(i, j) == CellStatus::kMbd) continue;
        // par1: z - a theta = -a b + e; otherwise z - a theta = -b + e.
        const double x = config_.par1 ? -a : -1.0;
        const double obs = state_.z(i, j) - a * state_.persons.theta[i];
        lp += x * x;
        ll += x * obs;
      }
      b = draw_conjugate_scalar(prior.mean[0], prior.cov(0, 0), lp, ll, rng);
    }
  }
}

void GibbsSampler::sample_item_rt_params(Rng& rng) {
  const bool fix_phi = config_.fixed_phi.has_value() || !config_.td || config_.wl;
  const bool fix_lambda = config_.fixed_lambda.has_value();
  if (fix_phi && fix_lambda) return;
  for (Eigen::Index j = 0; j < k_; ++j) {
    const Eigen::Vector4d mu = item_prior_mean(j);
    double& phi = state_.items.phi[j];
    double& lambda = state_.items.lambda[j];
    const double s2 = state_.items.sigma2[j];

    if (!fix_phi && !fix_lambda && !config_.par1) {
      // Joint conditional: rt = lambda - phi*zeta + eps, eps ~ N(0, sigma2).
      const ConditionalNormal prior =
          mvn_conditional(mu, state_.sigma_i, {2, 3}, {0, 1},
                          Eigen::Vector2d(state_.items.a[j], state_.items.b[j]));
      Eigen::Matrix2d prec = prior.cov.inverse();
      Eigen::Vector2d lin = prec * prior.mean;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (status_rt_(i, j) == CellStatus::kMbd) continue;
        const Eigen::Vector2d x(-speed_value(i, j), 1.0);
        prec += x * x.transpose() / s2;
        lin += x * state_.rt_work(i, j) / s2;
      }
      const Eigen::Vector2d draw = draw_positive_bivariate(lin, prec, rng);
      phi = draw[0];
      lambda = draw[1];
      continue;
    }

    if (!fix_phi) {
      const ConditionalNormal prior = mvn_conditional(
          mu, state_.sigma_i, {2}, {0, 1, 3},
          Eigen::Vector3d(state_.items.a[j], state_.items.b[j], lambda));
      double lp = 0.0;
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (status_rt_(i, j) == CellStatus::kMbd) continue;
        const double zv = speed_value(i, j);
        // par1: rt = phi (lambda - zeta); otherwise rt - lambda = -phi zeta.
        const double x = config_.par1 ? lambda - zv : -zv;
        const double obs = config_.par1 ? state_.rt_work(i, j) : state_.rt_work(i, j) - lambda;
        lp += x * x / s2;
        ll += x * obs / s2;
      }
      const double prec = 1.0 / prior.cov(0, 0) + lp;
      const double mean = (prior.mean[0] / prior.cov(0, 0) + ll) / prec;
      phi = draw_positive_scalar(mean, 1.0 / prec, rng);
    }
    if (!fix_lambda) {
      const ConditionalNormal prior = mvn_conditional(
          mu, state_.sigma_i, {3}, {0, 1, 2},
          Eigen::Vector3d(state_.items.a[j], state_.items.b[j], phi));
      double lp = 0.0;
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        if (status_rt_(i, j) == CellStatus::kMbd) continue;
        const double zv = speed_value(i, j);
        double x;
        double obs;
        if (config_.wl) {
          x = 1.0;
          obs = state_.rt_work(i, j) + zv;
        } else if (config_.par1) {
          x = phi;  // rt + phi zeta = phi lambda + eps
          obs = state_.rt_work(i, j) + phi * zv;
        } else {
          x = 1.0;  // rt + phi zeta = lambda + eps
          obs = state_.rt_work(i, j) + phi * zv;
        }
        lp += x * x / s2;
        ll += x * obs / s2;
      }
      lambda = draw_conjugate_scalar(prior.mean[0], prior.cov(0, 0), lp, ll, rng);
    }
  }
}

void GibbsSampler::sample_sigma2(Rng& rng) {
  for (Eigen::Index j = 0; j < k_; ++j) {
    double sse = 0.0;
    double cnt = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (status_rt_(i, j) == CellStatus::kMbd) continue;
      const double r = state_.rt_work(i, j) - rt_mu(i, j);
      sse += r * r;
      cnt += 1.0;
    }
    state_.items.sigma2[j] =
        rng.inv_gamma(priors_.item.sigma2_shape + 0.5 * cnt, priors_.item.sigma2_scale + 0.5 * sse);
  }
  if (config_.wl)
    state_.items.phi = state_.items.sigma2.array().sqrt().inverse();
}

void GibbsSampler::sample_persons(Rng& rng) {
  const int dim = person_dim();
  Eigen::LLT<Eigen::MatrixXd> llt(state_.sigma_p);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("person covariance draw is not positive definite");
  const Eigen::MatrixXd prior_prec =
      llt.solve(Eigen::MatrixXd::Identity(dim, dim));

  for (Eigen::Index i = 0; i < n_; ++i) {
    const Eigen::VectorXd m = person_prior_mean(i);
    Eigen::MatrixXd prec = prior_prec;
    Eigen::VectorXd lin = prior_prec * m;
    for (Eigen::Index j = 0; j < k_; ++j) {
      if (status_y_(i, j) != CellStatus::kMbd) {
        // z = a theta + offset + e; offset is -b or -a*b under par1.
        const double aj = state_.items.a[j];
        const double offset = config_.par1 ? -aj * state_.items.b[j] : -state_.items.b[j];
        prec(0, 0) += aj * aj;
        lin[0] += aj * (state_.z(i, j) - offset);
      }
      if (status_rt_(i, j) != CellStatus::kMbd) {
        const double s2 = state_.items.sigma2[j];
        if (config_.speed_model == SpeedModel::kQuadratic) {
          const double x = x_time_(i, j);
          Eigen::Vector3d v(1.0, x, x * x);
          const double u = -state_.items.phi[j];
          const double resid = state_.rt_work(i, j) - state_.items.lambda[j];
          prec.block<3, 3>(1, 1) += (u * u / s2) * (v * v.transpose());
          lin.tail(3) += (u / s2) * resid * v;
        } else {
          // rt = offset + u*zeta + eps.
          double u;
          double offset;
          if (config_.wl) {
            u = -1.0;
            offset = state_.items.lambda[j];
          } else if (config_.par1) {
            u = -state_.items.phi[j];
            offset = state_.items.phi[j] * state_.items.lambda[j];
          } else {
            u = -state_.items.phi[j];
            offset = state_.items.lambda[j];
          }
          prec(1, 1) += u * u / s2;
          lin[1] += u * (state_.rt_work(i, j) - offset) / s2;
        }
      }
    }
    const Eigen::VectorXd draw = rng.mvn_precision(lin, prec);
    state_.persons.theta[i] = draw[0];
    if (config_.speed_model == SpeedModel::kQuadratic)
      state_.persons.zeta_q.row(i) = draw.tail(3).transpose();
    else
      state_.persons.zeta[i] = draw[1];
  }
}

void GibbsSampler::rebuild_sigma_p_from_pieces() {
  const Eigen::Vector3d& d = state_.quad_var;
  const Eigen::Vector3d& g = state_.theta_on_speed;
  Eigen::MatrixXd sp = Eigen::MatrixXd::Zero(4, 4);
  const Eigen::Vector3d cov = d.cwiseProduct(g);
  sp(0, 0) = g.dot(cov) + state_.theta_resid_var;
  for (int j = 0; j < 3; ++j) {
    sp(0, j + 1) = sp(j + 1, 0) = cov[j];
    sp(j + 1, j + 1) = d[j];
  }
  state_.sigma_p = sp;
}

void GibbsSampler::sample_population_hyper(Rng& rng) {
  const auto& pp = priors_.pop;
  if (config_.speed_model == SpeedModel::kQuadratic) {
    // Speed-component variances (means pinned at zero, covariances carried by
    // the time discriminations).
    for (int c = 0; c < 3; ++c) {
      const double ss = state_.persons.zeta_q.col(c).squaredNorm();
      state_.quad_var[c] =
          rng.inv_gamma(pp.quad_var_shape + 0.5 * n_, pp.quad_var_scale + 0.5 * ss);
    }
    // Ability given the speed components: theta = c0 + gamma' zeta + e.
    Eigen::MatrixXd d(n_, 4);
    d.col(0).setOnes();
    d.rightCols(3) = state_.persons.zeta_q;
    const double s2 = state_.theta_resid_var;
    Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(4, 4) / pp.mean_prior_var;
    prec += d.transpose() * d / s2;
    Eigen::VectorXd lin = d.transpose() * state_.persons.theta / s2;
    const Eigen::VectorXd coef = rng.mvn_precision(lin, prec);
    state_.mu_p[0] = coef[0];
    state_.theta_on_speed = coef.tail(3);
    const double sse = (state_.persons.theta - d * coef).squaredNorm();
    state_.theta_resid_var =
        rng.inv_gamma(pp.theta_resid_shape + 0.5 * n_, pp.theta_resid_scale + 0.5 * sse);
    rebuild_sigma_p_from_pieces();
    return;
  }

  // Free mean components: intercepts under ident=1, covariate coefficients
  // whenever predictors are supplied (ident=2 keeps intercepts at zero).
  const bool intercept = config_.ident == 1;
  const Eigen::Index pa = data_.xpa.cols();
  const Eigen::Index pt = data_.xpt.cols();
  const Eigen::Index p_theta = (intercept ? 1 : 0) + pa;
  const Eigen::Index p_zeta = (intercept ? 1 : 0) + pt;
  const Eigen::Index p = p_theta + p_zeta;
  Eigen::LLT<Eigen::MatrixXd> llt(state_.sigma_p);
  const Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(2, 2));
  if (p > 0) {
    Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(p, p) / pp.mean_prior_var;
    Eigen::VectorXd lin = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd di = Eigen::MatrixXd::Zero(2, p);
    for (Eigen::Index i = 0; i < n_; ++i) {
      di.setZero();
      Eigen::Index c = 0;
      if (intercept) di(0, c++) = 1.0;
      for (Eigen::Index q = 0; q < pa; ++q) di(0, c++) = data_.xpa(i, q);
      if (intercept) di(1, c++) = 1.0;
      for (Eigen::Index q = 0; q < pt; ++q) di(1, c++) = data_.xpt(i, q);
      const Eigen::Vector2d u(state_.persons.theta[i], state_.persons.zeta[i]);
      prec += di.transpose() * w * di;
      lin += di.transpose() * w * u;
    }
    const Eigen::VectorXd coef = rng.mvn_precision(lin, prec);
    Eigen::Index c = 0;
    state_.mu_p.setZero();
    if (intercept) state_.mu_p[0] = coef[c++];
    for (Eigen::Index q = 0; q < pa; ++q) state_.beta_theta[q] = coef[c++];
    if (intercept) state_.mu_p[1] = coef[c++];
    for (Eigen::Index q = 0; q < pt; ++q) state_.beta_zeta[q] = coef[c++];
  } else {
    state_.mu_p.setZero();
  }

  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < n_; ++i) {
    const Eigen::VectorXd m = person_prior_mean(i);
    const Eigen::Vector2d r(state_.persons.theta[i] - m[0], state_.persons.zeta[i] - m[1]);
    scatter += r * r.transpose();
  }
  Eigen::MatrixXd scale = pp.v_p + scatter;
  Eigen::LLT<Eigen::MatrixXd> chk(scale);
  if (chk.info() != Eigen::Success)
    throw std::runtime_error("population scatter matrix is not positive definite");
  state_.sigma_p = rng.inv_wishart(pp.nu_p + n_, scale);
}

void GibbsSampler::sample_item_hyper(Rng& rng) {
  const auto& ip = priors_.item;
  const bool covariates = data_.xia.size() || data_.xit.size();
  Eigen::MatrixXd xs(k_, 4);
  for (Eigen::Index j = 0; j < k_; ++j)
    xs.row(j) << state_.items.a[j], state_.items.b[j], state_.items.phi[j],
        state_.items.lambda[j];

  if (!covariates) {
    // Normal-inverse-Wishart conjugate update.
    if (k_ == 0) {
      state_.sigma_i = rng.inv_wishart(ip.nu_i, ip.v_i);
      state_.mu_i = rng.mvn(ip.mu_0, state_.sigma_i / ip.kappa);
      return;
    }
    const double kn = ip.kappa + k_;
    const double nun = ip.nu_i + k_;
    const Eigen::Vector4d xbar = xs.colwise().mean();
    const Eigen::Vector4d mun = (ip.kappa * ip.mu_0 + k_ * xbar) / kn;
    Eigen::Matrix4d scatter = Eigen::Matrix4d::Zero();
    for (Eigen::Index j = 0; j < k_; ++j) {
      const Eigen::Vector4d r = xs.row(j).transpose() - xbar;
      scatter += r * r.transpose();
    }
    const Eigen::Vector4d dev = xbar - ip.mu_0;
    const Eigen::Matrix4d vn =
        ip.v_i + scatter + (ip.kappa * k_ / kn) * dev * dev.transpose();
    state_.sigma_i = rng.inv_wishart(nun, vn);
    state_.mu_i = rng.mvn(mun, state_.sigma_i / kn);
    return;
  }

  // Covariate regression for the difficulty / time-intensity means; vague
  // normal priors on the coefficients, then the covariance about the fit.
  const Eigen::Index pb = data_.xia.size() ? data_.xia.cols() : 1;
  const Eigen::Index pl = data_.xit.size() ? data_.xit.cols() : 1;
  const Eigen::Index p = 2 + pb + pl;
  Eigen::LLT<Eigen::Matrix4d> llt(state_.sigma_i);
  const Eigen::Matrix4d w = llt.solve(Eigen::Matrix4d::Identity());
  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(p, p) / ip.coef_prior_var;
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(4, p);
  for (Eigen::Index j = 0; j < k_; ++j) {
    dk.setZero();
    dk(0, 0) = 1.0;
    for (Eigen::Index q = 0; q < pb; ++q)
      dk(1, 1 + q) = data_.xia.size() ? data_.xia(j, q) : 1.0;
    dk(2, 1 + pb) = 1.0;
    for (Eigen::Index q = 0; q < pl; ++q)
      dk(3, 2 + pb + q) = data_.xit.size() ? data_.xit(j, q) : 1.0;
    prec += dk.transpose() * w * dk;
    lin += dk.transpose() * w * xs.row(j).transpose();
  }
  const Eigen::VectorXd coef = rng.mvn_precision(lin, prec);
  state_.mu_i[0] = coef[0];
  state_.mu_i[2] = coef[1 + pb];
  if (data_.xia.size())
    state_.beta_b = coef.segment(1, pb);
  else
    state_.mu_i[1] = coef[1];
  if (data_.xit.size())
    state_.beta_lambda = coef.segment(2 + pb, pl);
  else
    state_.mu_i[3] = coef[2 + pb + 0];

  Eigen::Matrix4d scatter = Eigen::Matrix4d::Zero();
  for (Eigen::Index j = 0; j < k_; ++j) {
    const Eigen::Vector4d r = xs.row(j).transpose() - item_prior_mean(j);
    scatter += r * r.transpose();
  }
  state_.sigma_i = rng.inv_wishart(ip.nu_i + k_, Eigen::Matrix4d(ip.v_i + scatter));

  // Display means for the regression components.
  if (data_.xia.size()) state_.mu_i[1] = (data_.xia * state_.beta_b).mean();
  if (data_.xit.size()) state_.mu_i[3] = (data_.xit * state_.beta_lambda).mean();
}

void GibbsSampler::impute_missing(Rng& rng) {
  for (Eigen::Index i = 0; i < n_; ++i)
    for (Eigen::Index j = 0; j < k_; ++j) {
      if (status_y_(i, j) == CellStatus::kMar) {
        const double p = response_probability(state_.persons.theta[i], state_.items.a[j],
                                              state_.items.b[j], state_.items.c[j],
                                              config_.par1);
        state_.y_work(i, j) = rng.bernoulli(p) ? 1.0 : 0.0;
        if (state_.y_work(i, j) == 0.0) state_.persons.s(i, j) = 1;
      }
      if (status_rt_(i, j) == CellStatus::kMar)
        state_.rt_work(i, j) = rng.normal(rt_mu(i, j), std::sqrt(state_.items.sigma2[j]));
    }
}

void GibbsSampler::apply_identification() {
  if (!identify_) return;
  const bool quad = config_.speed_model == SpeedModel::kQuadratic;

  // Scale: product of discriminations to one, compensated on the person side
  // so every linear predictor is unchanged.
  if (!config_.fixed_a) {
    const double g = geometric_mean(state_.items.a);
    state_.items.a /= g;
    state_.persons.theta *= g;
    if (config_.par1) state_.items.b *= g;
    state_.mu_p[0] *= g;
    state_.sigma_p.row(0) *= g;
    state_.sigma_p.col(0) *= g;
    if (quad) {
      state_.theta_resid_var *= g * g;
      state_.theta_on_speed *= g;
    }
    if (state_.beta_theta.size()) state_.beta_theta *= g;
  }
  if (config_.td && !config_.wl && !config_.fixed_phi) {
    const double h = geometric_mean(state_.items.phi);
    state_.items.phi /= h;
    if (config_.par1) state_.items.lambda *= h;
    if (quad) {
      state_.persons.zeta_q *= h;
      state_.quad_var *= h * h;
      state_.theta_on_speed /= h;
      rebuild_sigma_p_from_pieces();
    } else {
      state_.persons.zeta *= h;
      state_.mu_p[1] *= h;
      state_.sigma_p.row(1) *= h;
      state_.sigma_p.col(1) *= h;
      if (state_.beta_zeta.size()) state_.beta_zeta *= h;
    }
  }

  // Location: ident=1 centers the difficulties and time intensities, with the
  // compensating shift carried by the person side. The quadratic model centers
  // the difficulties only (its RT location is pinned by zero speed means).
  const bool center_b = (config_.ident == 1 || quad) && !config_.fixed_b;
  if (center_b) {
    const double bbar = state_.items.b.mean();
    state_.items.b.array() -= bbar;
    state_.persons.theta.array() -= bbar;
    state_.mu_p[0] -= bbar;
  }
  if (config_.ident == 1 && !quad && !config_.fixed_lambda) {
    const double lbar = state_.items.lambda.mean();
    state_.items.lambda.array() -= lbar;
    state_.persons.zeta.array() -= lbar;
    state_.mu_p[1] -= lbar;
  }
}

void GibbsSampler::sweep(Rng& rng) {
  if (!initialized_) throw std::logic_error("GibbsSampler::sweep before initialize");
  augment_latent_responses(rng);
  sample_guessing(rng);
  sample_item_ra_params(rng);
  sample_item_rt_params(rng);
  sample_sigma2(rng);
  sample_persons(rng);
  sample_population_hyper(rng);
  sample_item_hyper(rng);
  impute_missing(rng);
  apply_identification();
}

namespace {

ChainStore run_chain_impl(const ObservedData& data, const RunConfig& config,
                          const Priors& priors, const Eigen::MatrixXd* x_time) {
  const ValidationReport report = validate_inputs(data, config);
  if (!report.ok())
    throw std::invalid_argument("invalid inputs:\n" + report.str());

  GibbsSampler sampler(data, config, priors);
  if (x_time) sampler.set_time_scale(*x_time);
  Rng rng(config.seed);
  sampler.initialize(rng);

  const Eigen::Index n = data.n_persons();
  const Eigen::Index k = data.n_items();
  const bool quad = config.speed_model == SpeedModel::kQuadratic;
  const int dim = quad ? 4 : 2;

  ChainStore store;
  store.config = config;
  store.n = n;
  store.k = k;
  store.a.resize(config.xg, k);
  store.b.resize(config.xg, k);
  store.phi.resize(config.xg, k);
  store.lambda.resize(config.xg, k);
  store.sigma2.resize(config.xg, k);
  if (config.guess) store.c.resize(config.xg, k);
  store.theta.resize(config.xg, n);
  if (quad) {
    store.zeta0.resize(config.xg, n);
    store.zeta1.resize(config.xg, n);
    store.zeta2.resize(config.xg, n);
  } else {
    store.zeta.resize(config.xg, n);
  }
  store.sigma_p.resize(config.xg, dim * dim);
  store.sigma_i.resize(config.xg, 16);

  if (quad) {
    store.mu_p_labels = {"mu_theta"};
  } else {
    if (data.xpa.size() || data.xpt.size()) {
      if (config.ident == 1) store.mu_p_labels.push_back("mu_theta");
      for (Eigen::Index q = 0; q < data.xpa.cols(); ++q)
        store.mu_p_labels.push_back("beta_theta." + std::to_string(q + 1));
      if (config.ident == 1) store.mu_p_labels.push_back("mu_zeta");
      for (Eigen::Index q = 0; q < data.xpt.cols(); ++q)
        store.mu_p_labels.push_back("beta_zeta." + std::to_string(q + 1));
    } else {
      store.mu_p_labels = {"mu_theta", "mu_zeta"};
    }
  }
  if (data.xia.size() || data.xit.size()) {
    store.mu_i_labels.push_back("mu_a");
    if (data.xia.size())
      for (Eigen::Index q = 0; q < data.xia.cols(); ++q)
        store.mu_i_labels.push_back("beta_b." + std::to_string(q + 1));
    else
      store.mu_i_labels.push_back("mu_b");
    store.mu_i_labels.push_back("mu_phi");
    if (data.xit.size())
      for (Eigen::Index q = 0; q < data.xit.cols(); ++q)
        store.mu_i_labels.push_back("beta_lam." + std::to_string(q + 1));
    else
      store.mu_i_labels.push_back("mu_lam");
  } else {
    store.mu_i_labels = {"mu_a", "mu_b", "mu_phi", "mu_lam"};
  }
  store.mu_p.resize(config.xg, static_cast<Eigen::Index>(store.mu_p_labels.size()));
  store.mu_i.resize(config.xg, static_cast<Eigen::Index>(store.mu_i_labels.size()));

  std::optional<diag::FitAccumulator> fit_acc;
  Mask use_y(n, k), use_rt(n, k);
  Eigen::MatrixXd eta, rt_mu_mat;
  if (config.residual) {
    fit_acc.emplace(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < k; ++j) {
        use_y(i, j) = sampler.y_status(i, j) == CellStatus::kObserved ? 1 : 0;
        use_rt(i, j) = sampler.rt_status(i, j) == CellStatus::kObserved ? 1 : 0;
      }
    eta.resize(n, k);
    rt_mu_mat.resize(n, k);
  }

  for (int it = 0; it < config.xg; ++it) {
    try {
      sampler.sweep(rng);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "iteration " << it + 1 << ": " << e.what();
      throw std::runtime_error(os.str());
    }
    const ParameterState& st = sampler.state();
    store.a.row(it) = st.items.a.transpose();
    store.b.row(it) = st.items.b.transpose();
    store.phi.row(it) = st.items.phi.transpose();
    store.lambda.row(it) = st.items.lambda.transpose();
    store.sigma2.row(it) = st.items.sigma2.transpose();
    if (config.guess) store.c.row(it) = st.items.c.transpose();
    store.theta.row(it) = st.persons.theta.transpose();
    if (quad) {
      store.zeta0.row(it) = st.persons.zeta_q.col(0).transpose();
      store.zeta1.row(it) = st.persons.zeta_q.col(1).transpose();
      store.zeta2.row(it) = st.persons.zeta_q.col(2).transpose();
    } else {
      store.zeta.row(it) = st.persons.zeta.transpose();
    }
    // Mean block: intercepts or regression coefficients, in label order.
    {
      Eigen::Index c = 0;
      Eigen::VectorXd row(store.mu_p.cols());
      if (quad) {
        row[c++] = st.mu_p[0];
      } else if (data.xpa.size() || data.xpt.size()) {
        if (config.ident == 1) row[c++] = st.mu_p[0];
        for (Eigen::Index q = 0; q < st.beta_theta.size(); ++q) row[c++] = st.beta_theta[q];
        if (config.ident == 1) row[c++] = st.mu_p[1];
        for (Eigen::Index q = 0; q < st.beta_zeta.size(); ++q) row[c++] = st.beta_zeta[q];
      } else {
        row[c++] = st.mu_p[0];
        row[c++] = st.mu_p[1];
      }
      store.mu_p.row(it) = row.transpose();
    }
    {
      Eigen::Index c = 0;
      Eigen::VectorXd row(store.mu_i.cols());
      row[c++] = st.mu_i[0];
      if (data.xia.size())
        for (Eigen::Index q = 0; q < st.beta_b.size(); ++q) row[c++] = st.beta_b[q];
      else
        row[c++] = st.mu_i[1];
      row[c++] = st.mu_i[2];
      if (data.xit.size())
        for (Eigen::Index q = 0; q < st.beta_lambda.size(); ++q) row[c++] = st.beta_lambda[q];
      else
        row[c++] = st.mu_i[3];
      store.mu_i.row(it) = row.transpose();
    }
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) store.sigma_p(it, r * dim + c) = st.sigma_p(r, c);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) store.sigma_i(it, r * 4 + c) = st.sigma_i(r, c);

    if (fit_acc && it + 1 > config.xgresid) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) {
          eta(i, j) = sampler.ra_eta(i, j);
          rt_mu_mat(i, j) = sampler.rt_mu(i, j);
        }
      diag::DrawView view;
      view.y = &st.y_work;
      view.rt = &st.rt_work;
      view.eta = &eta;
      view.rt_mu = &rt_mu_mat;
      view.sigma2 = &st.items.sigma2;
      view.s = &st.persons.s;
      view.use_y = &use_y;
      view.use_rt = &use_rt;
      fit_acc->accumulate(view);
    }
  }
  if (fit_acc) store.fit = fit_acc->finalize();
  return store;
}

}  // namespace

ChainStore run_chain(const ObservedData& data, const RunConfig& config, const Priors& priors) {
  return run_chain_impl(data, config, priors, nullptr);
}

ChainStore run_chain_quadratic(const ObservedData& data, const RunConfig& config,
                               const Priors& priors, const Eigen::MatrixXd& x_time) {
  RunConfig cfg = config;
  cfg.speed_model = SpeedModel::kQuadratic;
  return run_chain_impl(data, cfg, priors, &x_time);
}

}  // namespace jrt
