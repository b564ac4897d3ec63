#include "jrt/chain_analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jrt {

const ParamSummary* SummaryTable::find(const std::string& name) const {
  for (const auto& row : rows)
    if (row.name == name) return &row;
  return nullptr;
}

namespace {

double sample_variance(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / std::max<Eigen::Index>(1, v.size() - 1);
}

}  // namespace

double effective_sample_size(const Eigen::VectorXd& series) {
  const Eigen::Index n = series.size();
  if (n < 50) throw std::invalid_argument("effective_sample_size: series too short");
  const double mean = series.mean();
  const Eigen::ArrayXd centered = series.array() - mean;
  const double c0 = centered.square().sum() / n;
  if (c0 <= 0.0) return static_cast<double>(n);  // degenerate constant series

  auto rho = [&](Eigen::Index lag) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t + lag < n; ++t) acc += centered[t] * centered[t + lag];
    return acc / (n * c0);
  };

  // Sum consecutive pairs while they stay positive (initial positive sequence).
  double tau = 1.0;
  const Eigen::Index max_lag = n / 2;
  for (Eigen::Index lag = 1; lag + 1 <= max_lag; lag += 2) {
    const double pair = rho(lag) + rho(lag + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  double ess = n / tau;
  if (ess > n) ess = static_cast<double>(n);
  if (ess < 1.0) ess = 1.0;
  return ess;
}

double geweke_z(const Eigen::VectorXd& series, double frac_a, double frac_b) {
  const Eigen::Index n = series.size();
  if (n < 100) throw std::invalid_argument("geweke_z: series too short");
  const Eigen::Index na = static_cast<Eigen::Index>(frac_a * n);
  const Eigen::Index nb = static_cast<Eigen::Index>(frac_b * n);
  if (na < 2 || nb < 2 || na + nb > n) throw std::invalid_argument("geweke_z: bad windows");
  const Eigen::VectorXd wa = series.head(na);
  const Eigen::VectorXd wb = series.tail(nb);
  const double va = sample_variance(wa);
  const double vb = sample_variance(wb);
  const double diff = wa.mean() - wb.mean();
  if (va == 0.0 && vb == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  const double essa = na >= 50 ? effective_sample_size(wa) : static_cast<double>(na);
  const double essb = nb >= 50 ? effective_sample_size(wb) : static_cast<double>(nb);
  return diff / std::sqrt(va / essa + vb / essb);
}

namespace {

void add_rows(SummaryTable* table, const Eigen::MatrixXd& chain, int burn,
              const std::vector<std::string>& names) {
  const Eigen::Index m = chain.rows() - burn;
  for (Eigen::Index j = 0; j < chain.cols(); ++j) {
    const Eigen::VectorXd v = chain.col(j).tail(m);
    ParamSummary row;
    row.name = names[static_cast<std::size_t>(j)];
    row.eap = v.mean();
    row.sd = std::sqrt(sample_variance(v));
    row.ess = m >= 50 ? effective_sample_size(v) : static_cast<double>(m);
    row.mcse = row.ess > 0.0 ? row.sd / std::sqrt(row.ess) : 0.0;
    row.geweke_z = m >= 100 ? geweke_z(v) : 0.0;
    table->rows.push_back(row);
  }
}

std::vector<std::string> indexed(const std::string& prefix, Eigen::Index k) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) names.push_back(prefix + "." + std::to_string(j + 1));
  return names;
}

}  // namespace

SummaryTable summarize(const ChainStore& chain, double burnin_pct) {
  const int xg = chain.iterations();
  const int burn = static_cast<int>(std::ceil(burnin_pct * xg / 100.0));
  if (burn >= xg) throw std::invalid_argument("summarize: burn-in covers the whole chain");

  SummaryTable table;
  add_rows(&table, chain.a, burn, indexed("a", chain.k));
  add_rows(&table, chain.b, burn, indexed("b", chain.k));
  add_rows(&table, chain.phi, burn, indexed("phi", chain.k));
  add_rows(&table, chain.lambda, burn, indexed("lam", chain.k));
  add_rows(&table, chain.sigma2, burn, indexed("sig2", chain.k));
  if (chain.c.size()) add_rows(&table, chain.c, burn, indexed("c", chain.k));
  add_rows(&table, chain.mu_i, burn, chain.mu_i_labels);
  {
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(chain.sigma_i.cols()))));
    std::vector<std::string> names;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        names.push_back("Sigma_I." + std::to_string(r + 1) + "." + std::to_string(c + 1));
    add_rows(&table, chain.sigma_i, burn, names);
  }
  add_rows(&table, chain.mu_p, burn, chain.mu_p_labels);
  {
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(chain.sigma_p.cols()))));
    std::vector<std::string> names;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        names.push_back("Sigma_P." + std::to_string(r + 1) + "." + std::to_string(c + 1));
    add_rows(&table, chain.sigma_p, burn, names);
  }
  return table;
}

}  // namespace jrt
