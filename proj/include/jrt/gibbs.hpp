#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jrt/diagnostics.hpp"
#include "jrt/model.hpp"
#include "jrt/rng.hpp"

namespace jrt {

enum class CellStatus : std::uint8_t { kObserved = 0, kMar = 1, kMbd = 2 };

// One full draw of all unknowns, plus the augmented/imputed data it implies.
struct ParameterState {
  ItemBank items;
  PersonState persons;

  // Person population realization.
  Eigen::VectorXd mu_p;      // (mu_theta, mu_zeta), or (mu_theta, 0, 0, 0)
  Eigen::MatrixXd sigma_p;
  Eigen::VectorXd beta_theta, beta_zeta;  // covariate coefficients when supplied

  // Quadratic-model structural pieces behind sigma_p: diagonal speed variances,
  // the theta-on-speed regression, and its residual variance.
  Eigen::Vector3d quad_var{0.1, 0.1, 0.1};
  Eigen::Vector3d theta_on_speed{0.0, 0.0, 0.0};
  double theta_resid_var = 1.0;

  // Item population realization.
  Eigen::Vector4d mu_i;
  Eigen::Matrix4d sigma_i;
  Eigen::VectorXd beta_b, beta_lambda;

  // Augmented latent RA variables and the working (observed + imputed) data.
  Eigen::MatrixXd z;
  Eigen::MatrixXd y_work;
  Eigen::MatrixXd rt_work;
};

// Per-iteration record of the chain, one row per stored sweep.
struct ChainStore {
  Eigen::MatrixXd a, b, phi, lambda, sigma2, c;  // xg x K
  Eigen::MatrixXd theta;                          // xg x N
  Eigen::MatrixXd zeta;                           // xg x N (constant model)
  Eigen::MatrixXd zeta0, zeta1, zeta2;            // xg x N (quadratic model)
  Eigen::MatrixXd mu_p;                           // xg x #labels
  Eigen::MatrixXd sigma_p;                        // xg x dim*dim, row-major blocks
  Eigen::MatrixXd mu_i;                           // xg x #labels
  Eigen::MatrixXd sigma_i;                        // xg x 16
  std::vector<std::string> mu_p_labels, mu_i_labels;

  RunConfig config;
  Eigen::Index n = 0, k = 0;
  std::optional<diag::FitReport> fit;

  int iterations() const { return static_cast<int>(a.rows()); }
  int burnin_draws() const;
  /// Column means over post-burn-in rows.
  Eigen::VectorXd posterior_mean(const Eigen::MatrixXd& chain) const;
  Eigen::VectorXd posterior_sd(const Eigen::MatrixXd& chain) const;
  /// N x 2 (or N x 4) posterior means of person parameters.
  Eigen::MatrixXd person_posterior_mean() const;
  Eigen::MatrixXd person_posterior_sd() const;
};

/// X_ik = (position - 1) / K for per-person item positions (each row must be a
/// permutation of 1..K).
Eigen::MatrixXd time_scale(const Eigen::MatrixXi& order);

// Blocked Gibbs sampler over the joint model. Block methods are public so the
// conditional distributions can be exercised one at a time in tests.
// Holds a reference to `data`, which must outlive the sampler.
class GibbsSampler {
 public:
  GibbsSampler(const ObservedData& data, const RunConfig& config, const Priors& priors);

  /// Quadratic model: per-person time variable, N x K. Must be set before
  /// initialize() when speed_model is quadratic (defaults to column order).
  void set_time_scale(const Eigen::MatrixXd& x_time);

  void initialize(Rng& rng);
  void sweep(Rng& rng);

  void augment_latent_responses(Rng& rng);
  void sample_guessing(Rng& rng);
  void sample_item_ra_params(Rng& rng);
  void sample_item_rt_params(Rng& rng);
  void sample_sigma2(Rng& rng);
  void sample_persons(Rng& rng);
  void sample_population_hyper(Rng& rng);
  void sample_item_hyper(Rng& rng);
  void impute_missing(Rng& rng);
  void apply_identification();

  ParameterState& state() { return state_; }
  const ParameterState& state() const { return state_; }
  const RunConfig& config() const { return config_; }
  CellStatus y_status(Eigen::Index i, Eigen::Index j) const { return status_y_(i, j); }
  CellStatus rt_status(Eigen::Index i, Eigen::Index j) const { return status_rt_(i, j); }

  /// Replace response values in place (distribution-consistency tests regenerate
  /// the data between sweeps). Only valid when no cells are missing.
  void set_responses(const Eigen::MatrixXd& y, const Eigen::MatrixXd& rt);

  /// Identification rescaling on/off; on by default. The sampler without the
  /// rescaling move is the exact Gibbs kernel of the unidentified model.
  void set_identification_enabled(bool enabled) { identify_ = enabled; }

  double ra_eta(Eigen::Index i, Eigen::Index j) const;
  double rt_mu(Eigen::Index i, Eigen::Index j) const;
  /// Prior mean of person i, covariate regression applied when present.
  Eigen::VectorXd person_prior_mean(Eigen::Index i) const;
  /// Prior mean vector of item j (covariate regression applied when present).
  Eigen::Vector4d item_prior_mean(Eigen::Index j) const;

  Eigen::Index n_persons() const { return n_; }
  Eigen::Index n_items() const { return k_; }

 private:
  using StatusMatrix = Eigen::Matrix<CellStatus, Eigen::Dynamic, Eigen::Dynamic>;

  int person_dim() const { return config_.speed_model == SpeedModel::kQuadratic ? 4 : 2; }
  double speed_value(Eigen::Index i, Eigen::Index j) const;
  void rebuild_sigma_p_from_pieces();

  const ObservedData& data_;
  RunConfig config_;
  Priors priors_;
  Eigen::Index n_ = 0, k_ = 0;
  StatusMatrix status_y_, status_rt_;
  Eigen::MatrixXd x_time_;
  ParameterState state_;
  bool identify_ = true;
  bool initialized_ = false;
};

/// Run the full chain: initialization, xg sweeps in fixed block order, and
/// (when configured) residual/fit accumulation after xgresid draws.
ChainStore run_chain(const ObservedData& data, const RunConfig& config, const Priors& priors);

ChainStore run_chain_quadratic(const ObservedData& data, const RunConfig& config,
                               const Priors& priors, const Eigen::MatrixXd& x_time);

}  // namespace jrt
