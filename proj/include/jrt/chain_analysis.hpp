#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jrt/gibbs.hpp"

namespace jrt {

struct ParamSummary {
  std::string name;
  double eap = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  double mcse = 0.0;
  double geweke_z = 0.0;
};

struct SummaryTable {
  std::vector<ParamSummary> rows;
  const ParamSummary* find(const std::string& name) const;
};

/// ESS = n / (1 + 2 sum rho_t), with the autocorrelation sum truncated at the
/// first non-positive consecutive pair, clamped into (0, n]. A zero-variance
/// series counts as n independent draws.
double effective_sample_size(const Eigen::VectorXd& series);

/// Two-window mean comparison (default first 10% vs last 50%) with
/// ESS-adjusted window variances.
double geweke_z(const Eigen::VectorXd& series, double frac_a = 0.1, double frac_b = 0.5);

/// Per-scalar posterior summaries over post-burn-in draws: items first, then
/// the item and person population blocks.
SummaryTable summarize(const ChainStore& chain, double burnin_pct);

}  // namespace jrt
