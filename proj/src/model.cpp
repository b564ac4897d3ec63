#include "jrt/model.hpp"

#include <cmath>
#include <sstream>

#include "jrt/math_util.hpp"

namespace jrt {

namespace {
constexpr double kLogisticScale = 1.7;
}

bool is_missing(double x) { return std::isnan(x); }

ObservedData ObservedData::from_matrices(Eigen::MatrixXd y, Eigen::MatrixXd rt) {
  ObservedData d;
  d.mbd_y = Mask::Ones(y.rows(), y.cols());
  d.mbd_t = Mask::Ones(rt.rows(), rt.cols());
  d.y = std::move(y);
  d.rt = std::move(rt);
  return d;
}

ItemBank ItemBank::zero_init(Eigen::Index k) {
  ItemBank bank;
  bank.a = Eigen::VectorXd::Ones(k);
  bank.b = Eigen::VectorXd::Zero(k);
  bank.c = Eigen::VectorXd::Zero(k);
  bank.phi = Eigen::VectorXd::Ones(k);
  bank.lambda = Eigen::VectorXd::Zero(k);
  bank.sigma2 = Eigen::VectorXd::Ones(k);
  return bank;
}

PopulationPrior PopulationPrior::defaults(int dim) {
  PopulationPrior p;
  p.mu_p = Eigen::VectorXd::Zero(dim);
  p.sigma_p = Eigen::MatrixXd::Identity(dim, dim);
  p.nu_p = static_cast<double>(dim) + 2.0;
  p.v_p = Eigen::MatrixXd::Identity(dim, dim);
  return p;
}

ItemPrior ItemPrior::defaults() {
  ItemPrior p;
  p.mu_0 << 1.0, 0.0, 1.0, 0.0;
  p.mu_i = p.mu_0;
  p.sigma_i = Eigen::Matrix4d::Identity();
  p.v_i = Eigen::Matrix4d::Identity();
  return p;
}

Priors Priors::defaults(SpeedModel model) {
  Priors p;
  p.pop = PopulationPrior::defaults(model == SpeedModel::kQuadratic ? 4 : 2);
  p.item = ItemPrior::defaults();
  return p;
}

double ra_linear_predictor(double theta, double a, double b, bool par1) {
  return par1 ? a * (theta - b) : a * theta - b;
}

double response_probability(double theta, double a, double b, double c, bool par1) {
  return c + (1.0 - c) * math::normal_cdf(ra_linear_predictor(theta, a, b, par1));
}

double rt_mean(double zeta, double phi, double lambda, bool par1, bool wl) {
  if (wl) return lambda - zeta;
  return par1 ? phi * (lambda - zeta) : lambda - phi * zeta;
}

RaParams probit_to_logistic(const RaParams& p, double sigma_probit, double sigma_logistic) {
  // From a_hat / sigma_P = 1.7 a / sigma_L and b* = 1.7 b_hat.
  return {p.a * sigma_logistic / (kLogisticScale * sigma_probit), kLogisticScale * p.b};
}

RaParams logistic_to_probit(const RaParams& p, double sigma_probit, double sigma_logistic) {
  return {p.a * kLogisticScale * sigma_probit / sigma_logistic, p.b / kLogisticScale};
}

std::string ValidationReport::str() const {
  std::ostringstream os;
  for (const auto& e : errors) os << "  - " << e << "\n";
  return os.str();
}

namespace {

void check_covariates(const Eigen::MatrixXd& x, Eigen::Index rows, const char* name,
                      std::vector<std::string>* errors) {
  if (x.size() == 0) return;
  std::ostringstream os;
  if (x.rows() != rows) {
    os << name << " has " << x.rows() << " rows, expected " << rows;
    errors->push_back(os.str());
    return;
  }
  if (!x.allFinite()) {
    os << name << " contains non-finite entries";
    errors->push_back(os.str());
    return;
  }
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double lo = x.col(j).minCoeff();
    const double hi = x.col(j).maxCoeff();
    if (lo == hi) {
      std::ostringstream oc;
      oc << name << " column " << j + 1
         << " is constant; categorical predictors must be dummy coded without an "
            "all-constant column";
      errors->push_back(oc.str());
    }
  }
}

}  // namespace

ValidationReport validate_inputs(const ObservedData& data, const RunConfig& config) {
  ValidationReport report;
  auto& errors = report.errors;
  const Eigen::Index n = data.y.rows();
  const Eigen::Index k = data.y.cols();

  if (n < 2 || k < 2) errors.push_back("need at least 2 persons and 2 items");
  if (data.rt.rows() != n || data.rt.cols() != k) {
    std::ostringstream os;
    os << "Y is " << n << "x" << k << " but RT is " << data.rt.rows() << "x"
       << data.rt.cols();
    errors.push_back(os.str());
  }
  auto check_mask = [&](const Mask& m, const Eigen::MatrixXd& target, const char* name) {
    if (m.rows() != target.rows() || m.cols() != target.cols()) {
      std::ostringstream os;
      os << name << " mask dimensions " << m.rows() << "x" << m.cols()
         << " do not match data " << target.rows() << "x" << target.cols();
      errors.push_back(os.str());
      return;
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m(i, j) > 1) {
          std::ostringstream os;
          os << name << " mask value at (" << i + 1 << "," << j + 1 << ") is not 0/1";
          errors.push_back(os.str());
        } else if (m(i, j) == 0 && !is_missing(target(i, j))) {
          std::ostringstream os;
          os << name << " cell (" << i + 1 << "," << j + 1
             << ") is missing by design but carries an observed value";
          errors.push_back(os.str());
        }
      }
  };
  check_mask(data.mbd_y, data.y, "Y");
  if (data.rt.rows() == n && data.rt.cols() == k) check_mask(data.mbd_t, data.rt, "RT");

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const double v = data.y(i, j);
      if (!is_missing(v) && v != 0.0 && v != 1.0) {
        std::ostringstream os;
        os << "Y(" << i + 1 << "," << j + 1 << ") = " << v << " is not binary";
        errors.push_back(os.str());
      }
      const double t = data.rt(i, j);
      if (!is_missing(t) && !std::isfinite(t)) {
        std::ostringstream os;
        os << "RT(" << i + 1 << "," << j + 1 << ") is not finite";
        errors.push_back(os.str());
      }
    }

  check_covariates(data.xpa, n, "XPA", &errors);
  check_covariates(data.xpt, n, "XPT", &errors);
  check_covariates(data.xia, k, "XIA", &errors);
  check_covariates(data.xit, k, "XIT", &errors);

  if (config.xg < 1) errors.push_back("XG must be at least 1");
  if (config.burnin < 0.0 || config.burnin >= 100.0)
    errors.push_back("burnin percentage must lie in [0, 100)");
  if (config.ident != 1 && config.ident != 2) errors.push_back("ident must be 1 or 2");
  if (config.residual && config.xg <= config.xgresid)
    errors.push_back("residual analysis requires XG > XGresid");
  auto check_fixed = [&](const std::optional<Eigen::VectorXd>& v, const char* name,
                         bool positive) {
    if (!v) return;
    if (v->size() != k) {
      std::ostringstream os;
      os << name << " has length " << v->size() << ", expected " << k;
      errors.push_back(os.str());
    } else if (positive && v->minCoeff() <= 0.0) {
      std::ostringstream os;
      os << name << " entries must be positive";
      errors.push_back(os.str());
    }
  };
  check_fixed(config.fixed_a, "fixed discriminations", true);
  check_fixed(config.fixed_b, "fixed difficulties", false);
  check_fixed(config.fixed_phi, "fixed time discriminations", true);
  check_fixed(config.fixed_lambda, "fixed time intensities", false);
  if (config.fixed_phi && config.wl)
    errors.push_back("fixed time discriminations conflict with WL (phi is derived from sigma)");
  if (config.fixed_phi && !config.td)
    errors.push_back("fixed time discriminations conflict with td=false (phi is pinned at one)");

  if (config.speed_model == SpeedModel::kQuadratic) {
    if (config.guess) errors.push_back("guessing is not supported with the quadratic speed model");
    if (config.wl) errors.push_back("WL parameterization is not supported with the quadratic speed model");
    if (data.xpa.size() != 0 || data.xpt.size() != 0)
      errors.push_back("person covariates are not supported with the quadratic speed model");
  }
  return report;
}

}  // namespace jrt
