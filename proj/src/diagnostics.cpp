#include "jrt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "jrt/math_util.hpp"

namespace jrt::diag {

using math::clamp_prob;
using math::normal_cdf;

RaFitDraw ra_pattern_fit(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  RaFitDraw out;
  double expect = 0.0;
  double var = 0.0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const double pj = clamp_prob(p[j]);
    const double lp = std::log(pj);
    const double lq = std::log1p(-pj);
    out.l0 -= y[j] * lp + (1.0 - y[j]) * lq;
    expect -= pj * lp + (1.0 - pj) * lq;
    var += pj * (1.0 - pj) * (lp - lq) * (lp - lq);
  }
  if (var > 0.0) {
    out.ls = (out.l0 - expect) / std::sqrt(var);
  } else {
    out.ls = 0.0;
  }
  out.sig_prob = 1.0 - normal_cdf(out.ls);
  static const double kCrit = math::normal_quantile(1.0 - kAlpha);
  out.flag = out.ls > kCrit;
  return out;
}

double chi2_critical(int df, double alpha) {
  thread_local std::map<std::pair<int, int>, double> cache;
  const auto key = std::make_pair(df, static_cast<int>(alpha * 1e6));
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const double q = math::chi2_quantile(1.0 - alpha, df);
  cache[key] = q;
  return q;
}

RtFitDraw rt_pattern_fit(const Eigen::VectorXd& resid, const Eigen::VectorXd& sigma2) {
  RtFitDraw out;
  const Eigen::Index k = resid.size();
  for (Eigen::Index j = 0; j < k; ++j) out.lt += resid[j] * resid[j] / sigma2[j];
  if (k == 0) return out;
  out.sig_prob = math::chi2_sf(out.lt, static_cast<double>(k));
  out.flag = out.lt > chi2_critical(static_cast<int>(k));
  return out;
}

LatentResidual latent_residual_ra(double y, double eta, double threshold) {
  LatentResidual out;
  const double dens = math::normal_pdf(eta);
  if (y == 1.0) {
    const double denom = std::max(normal_cdf(eta), math::kProbFloor);
    out.expected = dens / denom;
    out.extreme_prob = normal_cdf(-threshold) / denom;
  } else {
    const double denom = std::max(normal_cdf(-eta), math::kProbFloor);
    out.expected = -dens / denom;
    out.extreme_prob = normal_cdf(-threshold) / denom;
  }
  if (out.extreme_prob > 1.0) out.extreme_prob = 1.0;
  return out;
}

double rt_residual_extreme_prob(double resid, double sigma, double threshold) {
  const double u = resid / sigma;
  return normal_cdf(-threshold - u) + 1.0 - normal_cdf(threshold - u);
}

KsResult ks_test_item(const Eigen::VectorXd& standardized_resid) {
  KsResult out;
  const Eigen::Index n = standardized_resid.size();
  if (n < 5) return out;
  std::vector<double> e(standardized_resid.data(), standardized_resid.data() + n);
  std::sort(e.begin(), e.end());
  double d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = normal_cdf(e[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    d = std::max(d, std::max(hi, lo));
  }
  out.d = d;
  out.p_value = math::kolmogorov_sf(d * std::sqrt(static_cast<double>(n)));
  out.applicable = true;
  return out;
}

FitAccumulator::FitAccumulator(Eigen::Index n, Eigen::Index k) : n_(n), k_(k) {
  sum_pfl_ = Eigen::VectorXd::Zero(n);
  sum_pflp_ = Eigen::VectorXd::Zero(n);
  sum_lzpt_ = Eigen::VectorXd::Zero(n);
  sum_lzp_ = Eigen::VectorXd::Zero(n);
  sum_cp1_ = Eigen::VectorXd::Zero(n);
  sum_cp2_ = Eigen::VectorXd::Zero(n);
  sum_cp3_ = Eigen::VectorXd::Zero(n);
  sum_ifl_ = Eigen::VectorXd::Zero(k);
  sum_iflp_ = Eigen::VectorXd::Zero(k);
  sum_lzi_ = Eigen::VectorXd::Zero(k);
  sum_resid_ = Eigen::MatrixXd::Zero(n, k);
  sum_resid_a_ = Eigen::MatrixXd::Zero(n, k);
  sum_exceed_ = Eigen::MatrixXd::Zero(n, k);
  sum_l0_ = Eigen::MatrixXd::Zero(n, k);
  count_resid_ = Eigen::MatrixXd::Zero(n, k);
  count_resid_a_ = Eigen::MatrixXd::Zero(n, k);
  count_l0_ = Eigen::MatrixXd::Zero(n, k);
  sum_ks_ = Eigen::VectorXd::Zero(k);
  count_ks_ = Eigen::VectorXi::Zero(k);
}

void FitAccumulator::accumulate(const DrawView& draw) {
  ++draws_;
  const Eigen::MatrixXd& y = *draw.y;
  const Eigen::MatrixXd& rt = *draw.rt;
  const Eigen::MatrixXd& eta = *draw.eta;
  const Eigen::MatrixXd& rt_mu = *draw.rt_mu;
  const Eigen::VectorXd& sigma2 = *draw.sigma2;
  const Mask& s = *draw.s;
  const Mask& use_y = *draw.use_y;
  const Mask& use_rt = *draw.use_rt;

  std::vector<double> yb, pb, rb, s2b;
  std::vector<bool> ra_flag(n_), rt_flag(n_);

  // Person side.
  for (Eigen::Index i = 0; i < n_; ++i) {
    yb.clear();
    pb.clear();
    rb.clear();
    s2b.clear();
    for (Eigen::Index j = 0; j < k_; ++j) {
      if (use_y(i, j) && s(i, j)) {
        yb.push_back(y(i, j));
        pb.push_back(normal_cdf(eta(i, j)));
      }
      if (use_rt(i, j)) {
        rb.push_back(rt(i, j) - rt_mu(i, j));
        s2b.push_back(sigma2[j]);
      }
    }
    const auto ra = ra_pattern_fit(Eigen::Map<const Eigen::VectorXd>(yb.data(), yb.size()),
                                   Eigen::Map<const Eigen::VectorXd>(pb.data(), pb.size()));
    const auto rtf = rt_pattern_fit(Eigen::Map<const Eigen::VectorXd>(rb.data(), rb.size()),
                                    Eigen::Map<const Eigen::VectorXd>(s2b.data(), s2b.size()));
    sum_pfl_[i] += ra.ls;
    sum_pflp_[i] += ra.sig_prob;
    sum_lzpt_[i] += rtf.lt;
    sum_lzp_[i] += rtf.sig_prob;
    sum_cp1_[i] += rtf.flag ? 1.0 : 0.0;
    sum_cp2_[i] += ra.flag ? 1.0 : 0.0;
    sum_cp3_[i] += joint_flag(ra.flag, rtf.flag) ? 1.0 : 0.0;
    ra_flag[i] = ra.flag;
    rt_flag[i] = rtf.flag;
  }

  // Item side: same statistics over columns.
  for (Eigen::Index j = 0; j < k_; ++j) {
    yb.clear();
    pb.clear();
    rb.clear();
    s2b.clear();
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (use_y(i, j) && s(i, j)) {
        yb.push_back(y(i, j));
        pb.push_back(normal_cdf(eta(i, j)));
      }
      if (use_rt(i, j)) {
        rb.push_back(rt(i, j) - rt_mu(i, j));
        s2b.push_back(sigma2[j]);
      }
    }
    const auto ra = ra_pattern_fit(Eigen::Map<const Eigen::VectorXd>(yb.data(), yb.size()),
                                   Eigen::Map<const Eigen::VectorXd>(pb.data(), pb.size()));
    const auto rtf = rt_pattern_fit(Eigen::Map<const Eigen::VectorXd>(rb.data(), rb.size()),
                                    Eigen::Map<const Eigen::VectorXd>(s2b.data(), s2b.size()));
    sum_ifl_[j] += ra.ls;
    sum_iflp_[j] += ra.sig_prob;
    sum_lzi_[j] += rtf.sig_prob;

    // Distribution of the item's standardized RT residuals.
    if (!rb.empty()) {
      Eigen::VectorXd std_res(static_cast<Eigen::Index>(rb.size()));
      for (std::size_t m = 0; m < rb.size(); ++m)
        std_res[static_cast<Eigen::Index>(m)] = rb[m] / std::sqrt(s2b[m]);
      const KsResult ks = ks_test_item(std_res);
      if (ks.applicable) {
        sum_ks_[j] += ks.p_value < kAlpha ? 1.0 : 0.0;
        ++count_ks_[j];
      }
    }
  }

  // Cell-level residual quantities.
  for (Eigen::Index i = 0; i < n_; ++i)
    for (Eigen::Index j = 0; j < k_; ++j) {
      if (use_y(i, j)) {
        const double p = clamp_prob(normal_cdf(eta(i, j)));
        sum_l0_(i, j) +=
            y(i, j) * std::log(p) + (1.0 - y(i, j)) * std::log1p(-p);
        count_l0_(i, j) += 1.0;
        const auto lr = latent_residual_ra(y(i, j), eta(i, j));
        sum_resid_a_(i, j) += lr.extreme_prob;
        count_resid_a_(i, j) += 1.0;
      }
      if (use_rt(i, j)) {
        const double resid = rt(i, j) - rt_mu(i, j);
        const double sigma = std::sqrt(sigma2[j]);
        sum_resid_(i, j) += rt_residual_extreme_prob(resid, sigma);
        sum_exceed_(i, j) += std::fabs(resid) > kResidualThreshold * sigma ? 1.0 : 0.0;
        count_resid_(i, j) += 1.0;
      }
    }
}

FitReport FitAccumulator::finalize() const {
  FitReport rep;
  const double d = std::max(draws_, 1);
  rep.draws = draws_;
  rep.pfl = sum_pfl_ / d;
  rep.pflp = sum_pflp_ / d;
  rep.lzpt = sum_lzpt_ / d;
  rep.lzp = sum_lzp_ / d;
  rep.eapcp1 = sum_cp1_ / d;
  rep.eapcp2 = sum_cp2_ / d;
  rep.eapcp3 = sum_cp3_ / d;
  rep.ifl = sum_ifl_ / d;
  rep.iflp = sum_iflp_ / d;
  rep.lzi = sum_lzi_ / d;
  auto mean_or_nan = [](const Eigen::MatrixXd& sum, const Eigen::MatrixXd& count) {
    Eigen::MatrixXd out(sum.rows(), sum.cols());
    for (Eigen::Index i = 0; i < sum.rows(); ++i)
      for (Eigen::Index j = 0; j < sum.cols(); ++j)
        out(i, j) = count(i, j) > 0.0 ? sum(i, j) / count(i, j)
                                      : std::numeric_limits<double>::quiet_NaN();
    return out;
  };
  rep.eap_resid = mean_or_nan(sum_resid_, count_resid_);
  rep.eap_resid_a = mean_or_nan(sum_resid_a_, count_resid_a_);
  rep.rt_exceed_rate = mean_or_nan(sum_exceed_, count_resid_);
  rep.eap_l0 = mean_or_nan(sum_l0_, count_l0_);
  rep.eap_ks.resize(k_);
  rep.ks_applicable.resize(k_);
  for (Eigen::Index j = 0; j < k_; ++j) {
    rep.ks_applicable[j] = count_ks_[j] > 0;
    rep.eap_ks[j] = count_ks_[j] > 0 ? sum_ks_[j] / count_ks_[j]
                                     : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace jrt::diag
