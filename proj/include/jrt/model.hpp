#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace jrt {

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Missing cells are carried as NaN in-memory; input codes (NA, empty, ad-hoc
/// sentinels) are translated at ingestion and never reach the model layer.
bool is_missing(double x);

enum class SpeedModel { kConstant, kQuadratic };

// Wide-format observations: persons in rows, items in columns.
struct ObservedData {
  Eigen::MatrixXd y;    // response accuracy, 0/1, NaN = missing
  Eigen::MatrixXd rt;   // log response times, NaN = missing
  Mask mbd_y;           // 1 = administered, 0 = missing by design
  Mask mbd_t;

  // Optional covariate blocks (dummy-coded categories).
  Eigen::MatrixXd xpa;  // N x P_A, ability predictors
  Eigen::MatrixXd xpt;  // N x P_T, speed predictors
  Eigen::MatrixXd xia;  // K x Q_A, difficulty predictors
  Eigen::MatrixXd xit;  // K x Q_T, time-intensity predictors

  Eigen::Index n_persons() const { return y.rows(); }
  Eigen::Index n_items() const { return y.cols(); }

  /// Construct with all-administered masks.
  static ObservedData from_matrices(Eigen::MatrixXd y, Eigen::MatrixXd rt);
};

struct ItemBank {
  Eigen::VectorXd a;       // discriminations, > 0
  Eigen::VectorXd b;       // difficulties (b_k, or the same-scale variant under par1)
  Eigen::VectorXd c;       // guessing probabilities in [0, 1); all zero when disabled
  Eigen::VectorXd phi;     // time discriminations, > 0
  Eigen::VectorXd lambda;  // time intensities, log-seconds
  Eigen::VectorXd sigma2;  // measurement error variances, > 0

  Eigen::Index size() const { return a.size(); }
  static ItemBank zero_init(Eigen::Index k);
};

struct PersonState {
  Eigen::VectorXd theta;   // abilities
  Eigen::VectorXd zeta;    // constant working speed
  Eigen::MatrixXd zeta_q;  // N x 3 speed components (intercept, trend, quadratic)
  Mask s;                  // guessing classification; S=1 means non-guessed

  Eigen::Index size() const { return theta.size(); }
};

struct PopulationPrior {
  Eigen::VectorXd mu_p;        // person mean (mu_theta, mu_zeta) [+ zeros, quadratic]
  Eigen::MatrixXd sigma_p;     // person covariance, 2x2 or 4x4
  double nu_p = 4.0;           // inverse-Wishart degrees of freedom
  Eigen::MatrixXd v_p;         // inverse-Wishart scale
  double mean_prior_var = 100.0;  // vague normal prior for free means / regression coefs

  // Inverse-gamma priors for the quadratic-model speed-component variances and
  // for the ability residual variance of the theta-on-speed regression.
  double quad_var_shape = 2.0;
  double quad_var_scale = 0.02;
  double theta_resid_shape = 2.0;
  double theta_resid_scale = 0.5;

  static PopulationPrior defaults(int dim = 2);
};

struct ItemPrior {
  Eigen::Vector4d mu_i;     // (mu_a, mu_b, mu_phi, mu_lambda)
  Eigen::Matrix4d sigma_i;
  double nu_i = 6.0;
  Eigen::Matrix4d v_i;
  Eigen::Vector4d mu_0;     // normal-inverse-Wishart location
  double kappa = 1.0;       // prior measurement count
  double guess_alpha = 20.0;
  double guess_beta = 80.0;
  // Inverse-gamma prior for the measurement error variances.
  double sigma2_shape = 1.0;
  double sigma2_scale = 1.0;
  double coef_prior_var = 100.0;  // vague prior for item-covariate regressions

  static ItemPrior defaults();
};

struct Priors {
  PopulationPrior pop;
  ItemPrior item;
  static Priors defaults(SpeedModel model = SpeedModel::kConstant);
};

struct RunConfig {
  int xg = 1000;           // total MCMC iterations, including burn-in
  double burnin = 10.0;    // percent of xg
  int ident = 2;           // 1: sum b = sum lambda = 0; 2: mu_theta = mu_zeta = 0
  bool guess = false;
  bool par1 = false;       // same-scale (bracket) parameterization
  bool td = true;          // estimate time discriminations
  bool wl = false;         // time discrimination = 1 / sd of measurement error
  bool residual = false;
  int xgresid = 1000;      // residual accumulation starts after this many draws
  std::uint64_t seed = 1;
  SpeedModel speed_model = SpeedModel::kConstant;

  std::optional<Eigen::VectorXd> fixed_a, fixed_b, fixed_phi, fixed_lambda;
};

/// Success probability for one item under the active parameterization.
/// par1=false: c + (1-c) Phi(a*theta - b); par1=true: c + (1-c) Phi(a*(theta - b)).
double response_probability(double theta, double a, double b, double c, bool par1);

/// Linear predictor of the RA probit, without the guessing floor.
double ra_linear_predictor(double theta, double a, double b, bool par1);

/// Expected log response time. par1=false: lambda - phi*zeta;
/// par1=true: phi*(lambda - zeta). Under wl the mean discrimination is 1.
double rt_mean(double zeta, double phi, double lambda, bool par1, bool wl);

// Probit <-> logistic item parameter transforms (scale factor 1.7).
struct RaParams {
  double a = 0.0;
  double b = 0.0;
};
RaParams probit_to_logistic(const RaParams& p, double sigma_probit = 1.0,
                            double sigma_logistic = 1.0);
RaParams logistic_to_probit(const RaParams& p, double sigma_probit = 1.0,
                            double sigma_logistic = 1.0);

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
  std::string str() const;
};

/// Checks type invariants, mask consistency, covariate dimensions, and config
/// coherence; reports every violation found.
ValidationReport validate_inputs(const ObservedData& data, const RunConfig& config);

}  // namespace jrt
