#pragma once

#include <optional>

#include <Eigen/Dense>

#include "jrt/model.hpp"
#include "jrt/rng.hpp"

namespace jrt {

// Generating values kept alongside a simulated dataset for later comparison
// against estimates.
struct TrueParameters {
  ItemBank items;
  Eigen::VectorXd theta;
  Eigen::VectorXd zeta;     // constant-speed model
  Eigen::MatrixXd zeta_q;   // quadratic model, N x 3
  Eigen::VectorXd mu_p;
  Eigen::MatrixXd sigma_p;
  Eigen::Vector4d mu_i;
  Eigen::Matrix4d sigma_i;

  /// Ability-speed correlation implied by sigma_p (constant model).
  double rho() const;
};

struct MissingSpec {
  double mar_frac_y = 0.0;   // fraction of administered RA cells deleted at random
  double mar_frac_rt = 0.0;
  Mask mbd;                  // design mask applied to both Y and RT; empty = complete
};

struct SimSpec {
  int n = 0;
  int k = 0;
  SpeedModel speed_model = SpeedModel::kConstant;
  bool guess = false;

  // Person population (constant model): unit ability variance by default and a
  // speed variance of .25 with correlation rho.
  double rho = 0.4;
  double var_theta = 1.0;
  double var_zeta = 0.25;

  // Item parameter generation.
  double sd_log_a = 0.3;
  double sd_b = 0.7;
  double sd_log_phi = 0.2;
  double mean_lambda = 4.0;
  double sd_lambda = 0.4;
  double sigma2_min = 0.2;
  double sigma2_max = 0.5;

  // Keep the truth on the identified scale: prod a = prod phi = 1, and
  // optionally sum b = sum lambda = 0 for ident=1 style runs.
  bool normalize_products = true;
  bool center_b = false;
  bool center_lambda = false;

  // Quadratic-model population: speed component variances, ability-speed
  // covariances, and the time scale (empty = items taken in column order).
  Eigen::Vector3d quad_var{0.06, 0.11, 0.06};
  Eigen::Vector3d theta_speed_cov{0.08, -0.05, -0.04};
  Eigen::MatrixXd x_time;

  std::optional<ItemBank> fixed_items;
  MissingSpec missing;
};

struct SimResult {
  ObservedData data;
  TrueParameters truth;
};

/// Ancestral draw of a dataset plus its generating parameters.
SimResult simulate_dataset(const SimSpec& spec, Rng& rng);

/// Draw a full parameter realization from the hyperpriors (persons centered at
/// zero; positivity of a and phi enforced by rejection, matching estimation).
TrueParameters draw_from_priors(int n, int k, const Priors& priors, SpeedModel model,
                                Rng& rng);

/// Fill y and rt (resized to N x K) from fixed parameters, all cells observed.
void fill_responses(const ItemBank& items, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& zeta, Eigen::MatrixXd* y, Eigen::MatrixXd* rt,
                    Rng& rng);

void fill_responses_quadratic(const ItemBank& items, const Eigen::VectorXd& theta,
                              const Eigen::MatrixXd& zeta_q, const Eigen::MatrixXd& x_time,
                              Eigen::MatrixXd* y, Eigen::MatrixXd* rt, Rng& rng);

/// Incomplete test design: a shared block of `common_items` administered to
/// everyone plus `groups` disjoint blocks of `block_items`, one per group.
/// Persons are split into contiguous groups of equal size.
Mask pretest_design(int n, int groups, int common_items, int block_items);

}  // namespace jrt
