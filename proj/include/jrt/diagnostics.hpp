#pragma once

#include <Eigen/Dense>

#include "jrt/model.hpp"

namespace jrt::diag {

inline constexpr double kResidualThreshold = 2.0;  // |residual| > 2 counts as extreme
inline constexpr double kAlpha = 0.05;

// Per-draw person fit for an RA pattern. `y` and `p` hold the responses and
// success probabilities of the cells entering the statistic.
struct RaFitDraw {
  double l0 = 0.0;       // negative log-likelihood
  double ls = 0.0;       // standardized statistic
  double sig_prob = 1.0; // P(more extreme than ls under the standard normal)
  bool flag = false;     // ls > Phi^{-1}(0.95)
};
RaFitDraw ra_pattern_fit(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

// Per-draw person fit for an RT pattern: sum of standardized squared errors,
// chi-squared with one degree of freedom per cell.
struct RtFitDraw {
  double lt = 0.0;
  double sig_prob = 1.0;  // P(chi2_K > lt)
  bool flag = false;      // lt > chi2 quantile at 1 - alpha
};
RtFitDraw rt_pattern_fit(const Eigen::VectorXd& resid, const Eigen::VectorXd& sigma2);

inline bool joint_flag(bool flag_ra, bool flag_rt) { return flag_ra && flag_rt; }

// Rao-Blackwell latent RA residual: conditional expectation given y and the
// linear predictor, and the probability of exceeding the threshold.
struct LatentResidual {
  double expected = 0.0;
  double extreme_prob = 0.0;
};
LatentResidual latent_residual_ra(double y, double eta, double threshold = kResidualThreshold);

/// P(|resid + noise| > threshold * sigma) for an observed RT residual.
double rt_residual_extreme_prob(double resid, double sigma,
                                double threshold = kResidualThreshold);

// Kolmogorov-Smirnov distance of standardized residuals against the standard
// normal, with its asymptotic p-value. Requires at least 5 residuals.
struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
  bool applicable = false;
};
KsResult ks_test_item(const Eigen::VectorXd& standardized_resid);

/// Critical value cache for chi-squared flags, keyed by integer df.
double chi2_critical(int df, double alpha = kAlpha);

// Posterior summaries of the fit quantities, averaged over retained draws.
struct FitReport {
  Eigen::VectorXd pfl;      // mean standardized RA person-fit statistic
  Eigen::VectorXd pflp;     // mean significance probability of the RA statistic
  Eigen::VectorXd lzpt;     // mean RT person-fit statistic
  Eigen::VectorXd lzp;      // mean significance probability of the RT statistic
  Eigen::VectorXd eapcp1;   // flag probability, RT pattern
  Eigen::VectorXd eapcp2;   // flag probability, RA pattern
  Eigen::VectorXd eapcp3;   // flag probability, joint pattern
  Eigen::VectorXd ifl;      // item fit, standardized RA column statistic
  Eigen::VectorXd iflp;     // its significance probability
  Eigen::VectorXd lzi;      // item RT column significance probability
  Eigen::MatrixXd eap_resid;       // per-cell RT extreme-residual probability
  Eigen::MatrixXd eap_resid_a;     // per-cell latent RA extreme-residual probability
  Eigen::MatrixXd rt_exceed_rate;  // per-cell frequency of |resid|/sigma > 2 at draws
  Eigen::MatrixXd eap_l0;          // per-cell RA log-likelihood contribution
  Eigen::VectorXd eap_ks;          // per-item probability of a significant KS test
  Eigen::Matrix<bool, Eigen::Dynamic, 1> ks_applicable;
  int draws = 0;
};

// One MCMC draw as seen by the accumulator. All matrices are N x K; use_*
// marks cells that enter the fit computations (administered and observed).
struct DrawView {
  const Eigen::MatrixXd* y = nullptr;
  const Eigen::MatrixXd* rt = nullptr;
  const Eigen::MatrixXd* eta = nullptr;    // RA linear predictor
  const Eigen::MatrixXd* rt_mu = nullptr;  // RT mean
  const Eigen::VectorXd* sigma2 = nullptr; // per item
  const Mask* s = nullptr;                 // guessing classification (ones if disabled)
  const Mask* use_y = nullptr;
  const Mask* use_rt = nullptr;
};

class FitAccumulator {
 public:
  FitAccumulator(Eigen::Index n, Eigen::Index k);
  void accumulate(const DrawView& draw);
  FitReport finalize() const;

 private:
  Eigen::Index n_, k_;
  int draws_ = 0;
  Eigen::VectorXd sum_pfl_, sum_pflp_, sum_lzpt_, sum_lzp_;
  Eigen::VectorXd sum_cp1_, sum_cp2_, sum_cp3_;
  Eigen::VectorXd sum_ifl_, sum_iflp_, sum_lzi_;
  Eigen::MatrixXd sum_resid_, sum_resid_a_, sum_exceed_, sum_l0_;
  Eigen::MatrixXd count_resid_, count_resid_a_, count_l0_;
  Eigen::VectorXd sum_ks_;
  Eigen::VectorXi count_ks_;
};

}  // namespace jrt::diag
