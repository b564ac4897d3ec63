#include "jrt/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace jrt::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_cell(const std::string& tok, double* value) {
  if (tok.empty() || tok == "NA" || tok == "na" || tok == "NaN") {
    *value = kNaN;
    return true;
  }
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') return false;
  *value = v;
  return true;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, path);
}

}  // namespace

Eigen::MatrixXd load_matrix_csv(const fs::path& path, MatrixKind kind) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  Eigen::Index cols = -1;
  int line_no = 0;
  bool first_content_row = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto toks = split_csv_line(line);
    std::vector<double> row(toks.size());
    bool numeric = true;
    for (std::size_t j = 0; j < toks.size(); ++j)
      if (!parse_cell(toks[j], &row[j])) {
        numeric = false;
        break;
      }
    if (!numeric) {
      if (first_content_row) {
        first_content_row = false;  // header row
        continue;
      }
      std::ostringstream os;
      os << path.string() << ": non-numeric token on line " << line_no;
      throw std::runtime_error(os.str());
    }
    first_content_row = false;
    if (cols < 0) cols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      std::ostringstream os;
      os << path.string() << ": ragged row on line " << line_no << " (" << row.size()
         << " cells, expected " << cols << ")";
      throw std::runtime_error(os.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no data rows");

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (kind == MatrixKind::kBinary && !std::isnan(v) && v != 0.0 && v != 1.0) {
        std::ostringstream os;
        os << path.string() << ": value " << v << " at row " << i + 1 << ", column "
           << j + 1 << " is not 0/1";
        throw std::runtime_error(os.str());
      }
      if (kind == MatrixKind::kMask) {
        if (std::isnan(v)) {
          std::ostringstream os;
          os << path.string() << ": mask cell at row " << i + 1 << ", column " << j + 1
             << " is missing";
          throw std::runtime_error(os.str());
        }
        if (v != 0.0 && v != 1.0) {
          std::ostringstream os;
          os << path.string() << ": mask value " << v << " at row " << i + 1 << ", column "
             << j + 1 << " is not 0/1";
          throw std::runtime_error(os.str());
        }
      }
      m(i, j) = v;
    }
  return m;
}

Eigen::MatrixXd log_transform_rt(const Eigen::MatrixXd& raw, const std::string& label) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      const double v = raw(i, j);
      if (std::isnan(v)) {
        out(i, j) = kNaN;
      } else if (v <= 0.0) {
        std::ostringstream os;
        os << label << ": response time " << v << " at row " << i + 1 << ", column "
           << j + 1 << " cannot be log-transformed; convert zero or negative times to NA "
              "before loading";
        throw std::runtime_error(os.str());
      } else {
        out(i, j) = std::log(v);
      }
    }
  return out;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& col_names) {
  std::ostringstream os;
  if (!col_names.empty()) {
    for (std::size_t j = 0; j < col_names.size(); ++j) {
      if (j) os << ",";
      os << col_names[j];
    }
    os << "\n";
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ",";
      os << format_double(m(i, j));
    }
    os << "\n";
  }
  write_text_atomic(path, os.str());
}

std::string file_digest(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!is) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

namespace {

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(finite_or_null(v[i]));
  return arr;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(finite_or_null(m(i, j)));
    arr.push_back(row);
  }
  return arr;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& row) {
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(row.size()))));
  Eigen::MatrixXd m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = row[r * d + c];
  return m;
}

double rho_eap(const ChainStore& chain) {
  const int burn = chain.burnin_draws();
  const Eigen::Index m = chain.sigma_p.rows() - burn;
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(chain.sigma_p.cols()))));
  double acc = 0.0;
  for (Eigen::Index it = burn; it < chain.sigma_p.rows(); ++it) {
    const double v00 = chain.sigma_p(it, 0);
    const double v11 = chain.sigma_p(it, d + 1);
    const double v01 = chain.sigma_p(it, 1);
    acc += v01 / std::sqrt(v00 * v11);
  }
  return acc / static_cast<double>(m);
}

double flagged_share(const Eigen::VectorXd& probs, double level = 0.95) {
  double cnt = 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i])) continue;  // not-applicable entries
    total += 1.0;
    if (probs[i] >= level) cnt += 1.0;
  }
  return total > 0.0 ? cnt / total : 0.0;
}

double mean_finite(const Eigen::MatrixXd& m) {
  double acc = 0.0;
  double cnt = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (std::isfinite(m(i, j))) {
        acc += m(i, j);
        cnt += 1.0;
      }
  return cnt > 0.0 ? acc / cnt : kNaN;
}

}  // namespace

void emit_report_text(std::ostream& os, const ChainStore& chain, const SummaryTable& summary,
                      const diag::FitReport* fit) {
  const auto require_row = [&](const std::string& name) {
    const ParamSummary* row = summary.find(name);
    if (!row) throw std::logic_error("report: summary row missing for " + name);
    return row;
  };
  const auto item_row = [&](const std::string& prefix, Eigen::Index j) {
    return require_row(prefix + "." + std::to_string(j + 1));
  };
  os << "=== Item parameters (EAP / SD) ===\n";
  os << std::setw(5) << "item";
  const bool guess = chain.c.size() > 0;
  os << std::setw(9) << "a" << std::setw(8) << "SD" << std::setw(9) << "b" << std::setw(8)
     << "SD" << std::setw(9) << "phi" << std::setw(8) << "SD" << std::setw(9) << "lam"
     << std::setw(8) << "SD" << std::setw(9) << "sig2" << std::setw(8) << "SD";
  if (guess) os << std::setw(9) << "c" << std::setw(8) << "SD";
  os << "\n";
  os << std::fixed << std::setprecision(3);
  for (Eigen::Index j = 0; j < chain.k; ++j) {
    os << std::setw(5) << j + 1;
    for (const char* p : {"a", "b", "phi", "lam", "sig2"}) {
      const ParamSummary* row = item_row(p, j);
      os << std::setw(9) << row->eap << std::setw(8) << row->sd;
    }
    if (guess) {
      const ParamSummary* row = item_row("c", j);
      os << std::setw(9) << row->eap << std::setw(8) << row->sd;
    }
    os << "\n";
  }

  os << "\n=== Item population ===\n";
  os << std::setw(14) << "parameter" << std::setw(10) << "EAP" << std::setw(9) << "SD"
     << std::setw(10) << "ESS" << std::setw(10) << "MCSE" << std::setw(9) << "Geweke\n";
  for (const auto& name : chain.mu_i_labels) {
    const ParamSummary* row = summary.find(name);
    os << std::setw(14) << name << std::setw(10) << row->eap << std::setw(9) << row->sd
       << std::setw(10) << std::setprecision(0) << row->ess << std::setprecision(4)
       << std::setw(10) << row->mcse << std::setprecision(2) << std::setw(8) << row->geweke_z
       << std::setprecision(3) << "\n";
  }
  os << "Sigma_I (EAP):\n";
  const Eigen::MatrixXd si = unflatten(chain.posterior_mean(chain.sigma_i));
  os << si << "\n";

  os << "\n=== Person population ===\n";
  for (const auto& name : chain.mu_p_labels) {
    const ParamSummary* row = summary.find(name);
    os << std::setw(14) << name << std::setw(10) << row->eap << std::setw(9) << row->sd
       << std::setw(10) << std::setprecision(0) << row->ess << std::setprecision(4)
       << std::setw(10) << row->mcse << std::setprecision(2) << std::setw(8) << row->geweke_z
       << std::setprecision(3) << "\n";
  }
  os << "Sigma_P (EAP):\n";
  const Eigen::MatrixXd sp = unflatten(chain.posterior_mean(chain.sigma_p));
  os << sp << "\n";
  os << "rho (ability-speed correlation, EAP): " << rho_eap(chain) << "\n";

  if (fit) {
    os << "\n=== Residual Analysis ===\n";
    os << "RT patterns flagged aberrant (EAPCP1 >= .95): " << std::setprecision(2)
       << 100.0 * flagged_share(fit->eapcp1) << "%"
       << "  (mean flag probability " << 100.0 * fit->eapcp1.mean() << "%)\n";
    os << "RA patterns flagged aberrant (EAPCP2 >= .95): " << 100.0 * flagged_share(fit->eapcp2)
       << "%" << "  (mean flag probability " << 100.0 * fit->eapcp2.mean() << "%)\n";
    os << "Joint patterns flagged aberrant (EAPCP3 >= .95): "
       << 100.0 * flagged_share(fit->eapcp3) << "%" << "  (mean flag probability "
       << 100.0 * fit->eapcp3.mean() << "%)\n";
    os << "Significant RT patterns (lZP < .05): "
       << 100.0 * (fit->lzp.array() < 0.05).cast<double>().mean() << "%\n";
    os << "Significant RA patterns (PFlp < .05): "
       << 100.0 * (fit->pflp.array() < 0.05).cast<double>().mean() << "%\n";
    os << "Extreme RT residuals (cells with EAPresid >= .95): "
       << 100.0 * flagged_share(Eigen::VectorXd(fit->eap_resid.reshaped()), 0.95) << "%"
       << "  (draw rate |resid| > 2 sd: " << 100.0 * mean_finite(fit->rt_exceed_rate)
       << "%)\n";
    os << "Extreme RA latent residuals (cells with EAPresidA >= .95): "
       << 100.0 * flagged_share(Eigen::VectorXd(fit->eap_resid_a.reshaped()), 0.95) << "%"
       << "  (mean extreme probability " << 100.0 * mean_finite(fit->eap_resid_a) << "%)\n";
    int ks_cnt = 0;
    int ks_tot = 0;
    for (Eigen::Index j = 0; j < fit->eap_ks.size(); ++j)
      if (fit->ks_applicable[j]) {
        ++ks_tot;
        if (fit->eap_ks[j] >= 0.5) ++ks_cnt;
      }
    os << "KS test: " << ks_cnt << " of " << ks_tot
       << " items with non-normal RT residuals (EAPKS >= .5)\n";
  }
  os.unsetf(std::ios::fixed);
}

std::string report_json(const ChainStore& chain, const SummaryTable& summary,
                        const diag::FitReport* fit) {
  json doc;
  doc["n_persons"] = chain.n;
  doc["n_items"] = chain.k;
  doc["iterations"] = chain.config.xg;
  doc["burnin_percent"] = chain.config.burnin;
  doc["ident"] = chain.config.ident;

  json params = json::array();
  for (const auto& row : summary.rows) {
    json r;
    r["name"] = row.name;
    r["eap"] = finite_or_null(row.eap);
    r["sd"] = finite_or_null(row.sd);
    r["ess"] = finite_or_null(row.ess);
    r["mcse"] = finite_or_null(row.mcse);
    r["geweke_z"] = finite_or_null(row.geweke_z);
    params.push_back(r);
  }
  doc["parameters"] = params;
  doc["sigma_i_eap"] = matrix_json(unflatten(chain.posterior_mean(chain.sigma_i)));
  doc["sigma_p_eap"] = matrix_json(unflatten(chain.posterior_mean(chain.sigma_p)));
  doc["rho_eap"] = finite_or_null(rho_eap(chain));

  if (fit) {
    json f;
    f["pfl"] = vector_json(fit->pfl);
    f["pflp"] = vector_json(fit->pflp);
    f["lzpt"] = vector_json(fit->lzpt);
    f["lzp"] = vector_json(fit->lzp);
    f["eapcp1"] = vector_json(fit->eapcp1);
    f["eapcp2"] = vector_json(fit->eapcp2);
    f["eapcp3"] = vector_json(fit->eapcp3);
    f["ifl"] = vector_json(fit->ifl);
    f["iflp"] = vector_json(fit->iflp);
    f["lzi"] = vector_json(fit->lzi);
    f["eap_ks"] = vector_json(fit->eap_ks);
    f["pct_rt_flagged"] = 100.0 * flagged_share(fit->eapcp1);
    f["pct_ra_flagged"] = 100.0 * flagged_share(fit->eapcp2);
    f["pct_joint_flagged"] = 100.0 * flagged_share(fit->eapcp3);
    f["rt_exceed_rate"] = finite_or_null(mean_finite(fit->rt_exceed_rate));
    f["ra_extreme_mean_prob"] = finite_or_null(mean_finite(fit->eap_resid_a));
    doc["residual_analysis"] = f;
  } else {
    doc["residual_analysis"] = nullptr;
  }
  return doc.dump(2);
}

namespace {

void apply_prior_overrides(const fs::path& path, Priors* priors) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open prior file " + path.string());
  json doc = json::parse(is);
  if (doc.contains("pop")) {
    const auto& p = doc["pop"];
    auto& pop = priors->pop;
    if (p.contains("nu_p")) pop.nu_p = p["nu_p"].get<double>();
    if (p.contains("v_p_diag")) {
      const double d = p["v_p_diag"].get<double>();
      pop.v_p = d * Eigen::MatrixXd::Identity(pop.v_p.rows(), pop.v_p.cols());
    }
    if (p.contains("mean_prior_var")) pop.mean_prior_var = p["mean_prior_var"].get<double>();
    if (p.contains("quad_var_shape")) pop.quad_var_shape = p["quad_var_shape"].get<double>();
    if (p.contains("quad_var_scale")) pop.quad_var_scale = p["quad_var_scale"].get<double>();
    if (p.contains("theta_resid_shape")) pop.theta_resid_shape = p["theta_resid_shape"].get<double>();
    if (p.contains("theta_resid_scale")) pop.theta_resid_scale = p["theta_resid_scale"].get<double>();
  }
  if (doc.contains("item")) {
    const auto& p = doc["item"];
    auto& item = priors->item;
    if (p.contains("nu_i")) item.nu_i = p["nu_i"].get<double>();
    if (p.contains("v_i_diag")) item.v_i = p["v_i_diag"].get<double>() * Eigen::Matrix4d::Identity();
    if (p.contains("mu_0")) {
      const auto v = p["mu_0"].get<std::vector<double>>();
      if (v.size() != 4) throw std::runtime_error("prior file: mu_0 must have 4 entries");
      item.mu_0 = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
      item.mu_i = item.mu_0;
    }
    if (p.contains("kappa")) item.kappa = p["kappa"].get<double>();
    if (p.contains("guess_alpha")) item.guess_alpha = p["guess_alpha"].get<double>();
    if (p.contains("guess_beta")) item.guess_beta = p["guess_beta"].get<double>();
    if (p.contains("sigma2_shape")) item.sigma2_shape = p["sigma2_shape"].get<double>();
    if (p.contains("sigma2_scale")) item.sigma2_scale = p["sigma2_scale"].get<double>();
    if (p.contains("coef_prior_var")) item.coef_prior_var = p["coef_prior_var"].get<double>();
  }
}

Eigen::VectorXd load_vector_csv(const fs::path& path) {
  const Eigen::MatrixXd m = load_matrix_csv(path, MatrixKind::kReal);
  Eigen::VectorXd v;
  if (m.cols() == 1)
    v = m.col(0);
  else if (m.rows() == 1)
    v = m.row(0).transpose();
  else
    throw std::runtime_error(path.string() + ": expected a single row or column");
  if (!v.allFinite()) throw std::runtime_error(path.string() + ": vector has missing entries");
  return v;
}

void write_chain_csv(const fs::path& path, const Eigen::MatrixXd& chain,
                     const std::vector<std::string>& names) {
  std::vector<std::string> cols;
  cols.reserve(names.size() + 1);
  cols.push_back("iter");
  cols.insert(cols.end(), names.begin(), names.end());
  Eigen::MatrixXd with_iter(chain.rows(), chain.cols() + 1);
  for (Eigen::Index i = 0; i < chain.rows(); ++i) with_iter(i, 0) = static_cast<double>(i + 1);
  with_iter.rightCols(chain.cols()) = chain;
  write_matrix_csv(path, with_iter, cols);
}

std::vector<std::string> indexed_names(const std::string& prefix, Eigen::Index k) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < k; ++j) names.push_back(prefix + "." + std::to_string(j + 1));
  return names;
}

}  // namespace

int run_job(const JobSpec& spec, std::ostream& log) {
  ObservedData data;
  Priors priors = Priors::defaults(spec.config.speed_model);
  RunConfig config = spec.config;
  Eigen::MatrixXd x_time;
  try {
    data.y = load_matrix_csv(spec.y_path, MatrixKind::kBinary);
    Eigen::MatrixXd rt = load_matrix_csv(spec.rt_path, MatrixKind::kReal);
    data.rt = spec.log_rt ? log_transform_rt(rt, spec.rt_path.string()) : rt;
    const Eigen::Index n = data.y.rows();
    const Eigen::Index k = data.y.cols();
    auto mask_or_ones = [&](const std::optional<fs::path>& p) {
      if (!p) return Mask(Mask::Ones(n, k));
      const Eigen::MatrixXd m = load_matrix_csv(*p, MatrixKind::kMask);
      return Mask(m.cast<std::uint8_t>());
    };
    data.mbd_y = mask_or_ones(spec.mbdy_path);
    data.mbd_t = mask_or_ones(spec.mbdt_path);
    if (spec.xpa_path) data.xpa = load_matrix_csv(*spec.xpa_path, MatrixKind::kReal);
    if (spec.xpt_path) data.xpt = load_matrix_csv(*spec.xpt_path, MatrixKind::kReal);
    if (spec.xia_path) data.xia = load_matrix_csv(*spec.xia_path, MatrixKind::kReal);
    if (spec.xit_path) data.xit = load_matrix_csv(*spec.xit_path, MatrixKind::kReal);
    if (spec.fixed_a_path) config.fixed_a = load_vector_csv(*spec.fixed_a_path);
    if (spec.fixed_b_path) config.fixed_b = load_vector_csv(*spec.fixed_b_path);
    if (spec.fixed_phi_path) config.fixed_phi = load_vector_csv(*spec.fixed_phi_path);
    if (spec.fixed_lambda_path) config.fixed_lambda = load_vector_csv(*spec.fixed_lambda_path);
    if (spec.prior_path) apply_prior_overrides(*spec.prior_path, &priors);
    if (spec.item_order_path) {
      const Eigen::MatrixXd order = load_matrix_csv(*spec.item_order_path, MatrixKind::kReal);
      if (!order.allFinite())
        throw std::runtime_error("item order matrix has missing entries");
      x_time = time_scale(order.cast<int>());
    }
  } catch (const std::exception& e) {
    log << "input error: " << e.what() << "\n";
    return 2;
  }

  const ValidationReport report = validate_inputs(data, config);
  if (!report.ok()) {
    log << "invalid inputs:\n" << report.str();
    return 2;
  }

  ChainStore chain;
  try {
    if (config.speed_model == SpeedModel::kQuadratic) {
      if (x_time.size() == 0) {
        Eigen::MatrixXi order(data.y.rows(), data.y.cols());
        for (Eigen::Index j = 0; j < order.cols(); ++j)
          order.col(j).setConstant(static_cast<int>(j + 1));
        x_time = time_scale(order);
      }
      chain = run_chain_quadratic(data, config, priors, x_time);
    } else {
      chain = run_chain(data, config, priors);
    }
  } catch (const std::exception& e) {
    log << "estimation error: " << e.what() << "\n";
    return 3;
  }

  try {
    fs::create_directories(spec.out_dir);
    const auto& out = spec.out_dir;
    write_chain_csv(out / "chain_a.csv", chain.a, indexed_names("a", chain.k));
    write_chain_csv(out / "chain_b.csv", chain.b, indexed_names("b", chain.k));
    write_chain_csv(out / "chain_phi.csv", chain.phi, indexed_names("phi", chain.k));
    write_chain_csv(out / "chain_lambda.csv", chain.lambda, indexed_names("lam", chain.k));
    write_chain_csv(out / "chain_sigma2.csv", chain.sigma2, indexed_names("sig2", chain.k));
    if (chain.c.size())
      write_chain_csv(out / "chain_guess.csv", chain.c, indexed_names("c", chain.k));
    write_chain_csv(out / "chain_theta.csv", chain.theta, indexed_names("theta", chain.n));
    if (config.speed_model == SpeedModel::kQuadratic) {
      write_chain_csv(out / "chain_zeta0.csv", chain.zeta0, indexed_names("zeta0", chain.n));
      write_chain_csv(out / "chain_zeta1.csv", chain.zeta1, indexed_names("zeta1", chain.n));
      write_chain_csv(out / "chain_zeta2.csv", chain.zeta2, indexed_names("zeta2", chain.n));
    } else {
      write_chain_csv(out / "chain_zeta.csv", chain.zeta, indexed_names("zeta", chain.n));
    }
    write_chain_csv(out / "chain_mu_items.csv", chain.mu_i, chain.mu_i_labels);
    write_chain_csv(out / "chain_mu_persons.csv", chain.mu_p, chain.mu_p_labels);
    {
      const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(chain.sigma_i.cols()))));
      std::vector<std::string> names;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          names.push_back("Sigma_I." + std::to_string(r + 1) + "." + std::to_string(c + 1));
      write_chain_csv(out / "chain_sigma_items.csv", chain.sigma_i, names);
    }
    {
      const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(chain.sigma_p.cols()))));
      std::vector<std::string> names;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          names.push_back("Sigma_P." + std::to_string(r + 1) + "." + std::to_string(c + 1));
      write_chain_csv(out / "chain_sigma_persons.csv", chain.sigma_p, names);
    }

    {
      const Eigen::MatrixXd pm = chain.person_posterior_mean();
      const Eigen::MatrixXd ps = chain.person_posterior_sd();
      Eigen::MatrixXd person(pm.rows(), 2 * pm.cols());
      std::vector<std::string> names;
      const std::vector<std::string> base =
          config.speed_model == SpeedModel::kQuadratic
              ? std::vector<std::string>{"theta", "zeta0", "zeta1", "zeta2"}
              : std::vector<std::string>{"theta", "zeta"};
      for (Eigen::Index c = 0; c < pm.cols(); ++c) {
        person.col(2 * c) = pm.col(c);
        person.col(2 * c + 1) = ps.col(c);
        names.push_back(base[static_cast<std::size_t>(c)] + "_eap");
        names.push_back(base[static_cast<std::size_t>(c)] + "_sd");
      }
      write_matrix_csv(out / "person_estimates.csv", person, names);
    }

    const SummaryTable summary = summarize(chain, config.burnin);
    const diag::FitReport* fit = chain.fit ? &*chain.fit : nullptr;

    if (spec.format == ReportFormat::kText || spec.format == ReportFormat::kBoth) {
      std::ostringstream os;
      emit_report_text(os, chain, summary, fit);
      write_text_atomic(out / "summary.txt", os.str());
      log << os.str();
    }
    if (spec.format == ReportFormat::kStructured || spec.format == ReportFormat::kBoth)
      write_text_atomic(out / "report.json", report_json(chain, summary, fit));

    if (fit) {
      Eigen::MatrixXd person_fit(chain.n, 7);
      person_fit.col(0) = fit->pfl;
      person_fit.col(1) = fit->pflp;
      person_fit.col(2) = fit->lzpt;
      person_fit.col(3) = fit->lzp;
      person_fit.col(4) = fit->eapcp1;
      person_fit.col(5) = fit->eapcp2;
      person_fit.col(6) = fit->eapcp3;
      write_matrix_csv(out / "person_fit.csv", person_fit,
                       {"PFl", "PFlp", "lZPT", "lZP", "EAPCP1", "EAPCP2", "EAPCP3"});
      Eigen::MatrixXd item_fit(chain.k, 4);
      item_fit.col(0) = fit->ifl;
      item_fit.col(1) = fit->iflp;
      item_fit.col(2) = fit->lzi;
      item_fit.col(3) = fit->eap_ks;
      write_matrix_csv(out / "item_fit.csv", item_fit, {"IFl", "IFlp", "lZI", "EAPKS"});
      write_matrix_csv(out / "resid_rt.csv", fit->eap_resid);
      write_matrix_csv(out / "resid_ra.csv", fit->eap_resid_a);
      write_matrix_csv(out / "resid_rt_exceed.csv", fit->rt_exceed_rate);
      write_matrix_csv(out / "loglik_ra.csv", fit->eap_l0);
    }

    // Reproducibility manifest: inputs, digests, and the full configuration.
    json manifest;
    manifest["seed"] = config.seed;
    json cfg;
    cfg["xg"] = config.xg;
    cfg["burnin"] = config.burnin;
    cfg["ident"] = config.ident;
    cfg["guess"] = config.guess;
    cfg["par1"] = config.par1;
    cfg["td"] = config.td;
    cfg["wl"] = config.wl;
    cfg["residual"] = config.residual;
    cfg["xgresid"] = config.xgresid;
    cfg["log_rt"] = spec.log_rt;
    cfg["speed_model"] =
        config.speed_model == SpeedModel::kQuadratic ? "quadratic" : "constant";
    manifest["config"] = cfg;
    json inputs;
    auto add_input = [&](const char* name, const std::optional<fs::path>& p) {
      if (!p) return;
      inputs[name] = {{"path", p->string()}, {"fnv64", file_digest(*p)}};
    };
    inputs["y"] = {{"path", spec.y_path.string()}, {"fnv64", file_digest(spec.y_path)}};
    inputs["rt"] = {{"path", spec.rt_path.string()}, {"fnv64", file_digest(spec.rt_path)}};
    add_input("mbdy", spec.mbdy_path);
    add_input("mbdt", spec.mbdt_path);
    add_input("xpa", spec.xpa_path);
    add_input("xpt", spec.xpt_path);
    add_input("xia", spec.xia_path);
    add_input("xit", spec.xit_path);
    add_input("fixed_a", spec.fixed_a_path);
    add_input("fixed_b", spec.fixed_b_path);
    add_input("fixed_phi", spec.fixed_phi_path);
    add_input("fixed_lambda", spec.fixed_lambda_path);
    add_input("item_order", spec.item_order_path);
    add_input("priors", spec.prior_path);
    manifest["inputs"] = inputs;
    write_text_atomic(out / "manifest.json", manifest.dump(2));
  } catch (const std::exception& e) {
    log << "output error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace jrt::io
