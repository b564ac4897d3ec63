#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "jrt/io.hpp"
#include "jrt/simulate.hpp"

namespace fs = std::filesystem;

namespace {

int run_fit(jrt::io::JobSpec& spec, const std::string& format, const std::string& speed) {
  if (format == "text")
    spec.format = jrt::io::ReportFormat::kText;
  else if (format == "structured")
    spec.format = jrt::io::ReportFormat::kStructured;
  else
    spec.format = jrt::io::ReportFormat::kBoth;
  spec.config.speed_model =
      speed == "quadratic" ? jrt::SpeedModel::kQuadratic : jrt::SpeedModel::kConstant;
  return jrt::io::run_job(spec, std::cout);
}

int run_simulate(const jrt::SimSpec& spec, std::uint64_t seed, const fs::path& out,
                 int pre_groups, int pre_common, int pre_block) {
  jrt::SimSpec sim = spec;
  if (pre_groups > 0) {
    sim.missing.mbd = jrt::pretest_design(sim.n, pre_groups, pre_common, pre_block);
    sim.k = pre_common + pre_groups * pre_block;
  }
  jrt::Rng rng(seed);
  const jrt::SimResult result = jrt::simulate_dataset(sim, rng);
  fs::create_directories(out);
  jrt::io::write_matrix_csv(out / "y.csv", result.data.y);
  jrt::io::write_matrix_csv(out / "rt.csv", result.data.rt);
  if (pre_groups > 0) {
    jrt::io::write_matrix_csv(out / "mbd.csv", result.data.mbd_y.cast<double>());
  }
  nlohmann::json truth;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  truth["a"] = vec(result.truth.items.a);
  truth["b"] = vec(result.truth.items.b);
  truth["phi"] = vec(result.truth.items.phi);
  truth["lambda"] = vec(result.truth.items.lambda);
  truth["sigma2"] = vec(result.truth.items.sigma2);
  if (sim.guess) truth["c"] = vec(result.truth.items.c);
  truth["theta"] = vec(result.truth.theta);
  if (sim.speed_model == jrt::SpeedModel::kQuadratic) {
    truth["zeta0"] = vec(result.truth.zeta_q.col(0));
    truth["zeta1"] = vec(result.truth.zeta_q.col(1));
    truth["zeta2"] = vec(result.truth.zeta_q.col(2));
  } else {
    truth["zeta"] = vec(result.truth.zeta);
    truth["rho"] = result.truth.rho();
  }
  std::ofstream os(out / "true_params.json");
  os << truth.dump(2) << "\n";
  std::cout << "wrote " << (out / "y.csv").string() << ", rt.csv, true_params.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint modeling of response accuracy and log response times"};
  app.require_subcommand(1);

  // fit ---------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Estimate the joint model by Gibbs sampling");
  jrt::io::JobSpec spec;
  std::string format = "both";
  std::string speed = "constant";
  std::string y_path, rt_path, out_dir;
  std::string mbdy, mbdt, xpa, xpt, xia, xit, fa, fb, fphi, flam, order, prior;
  fit->add_option("--y", y_path, "RA matrix CSV (persons x items, 0/1, NA missing)")
      ->required();
  fit->add_option("--rt", rt_path, "log-RT matrix CSV (use --log-rt for raw seconds)")
      ->required();
  fit->add_option("--out", out_dir, "output directory")->required();
  fit->add_option("--xg", spec.config.xg, "total MCMC iterations");
  fit->add_option("--burnin", spec.config.burnin, "burn-in percentage of XG");
  fit->add_option("--ident", spec.config.ident, "identification rule (1 or 2)")
      ->check(CLI::IsMember({1, 2}));
  fit->add_flag("--guess", spec.config.guess, "estimate guessing parameters");
  fit->add_flag("--par1", spec.config.par1, "same-scale (bracket) parameterization");
  fit->add_flag("--td,!--no-td", spec.config.td, "estimate time discriminations");
  fit->add_flag("--wl", spec.config.wl,
                "time discrimination as reciprocal error standard deviation");
  fit->add_flag("--residual", spec.config.residual, "run the residual/fit analysis");
  fit->add_option("--xgresid", spec.config.xgresid,
                  "draws before residual accumulation starts");
  fit->add_flag("--log-rt", spec.log_rt, "log-transform the RT input");
  fit->add_option("--seed", spec.config.seed, "RNG seed");
  fit->add_option("--mbdy", mbdy, "missing-by-design mask for Y");
  fit->add_option("--mbdt", mbdt, "missing-by-design mask for RT");
  fit->add_option("--xpa", xpa, "ability predictors CSV");
  fit->add_option("--xpt", xpt, "speed predictors CSV");
  fit->add_option("--xia", xia, "difficulty predictors CSV");
  fit->add_option("--xit", xit, "time-intensity predictors CSV");
  fit->add_option("--fixed-a", fa, "pre-defined discriminations CSV");
  fit->add_option("--fixed-b", fb, "pre-defined difficulties CSV");
  fit->add_option("--fixed-phi", fphi, "pre-defined time discriminations CSV");
  fit->add_option("--fixed-lambda", flam, "pre-defined time intensities CSV");
  fit->add_option("--item-order", order, "per-person item position matrix (quadratic)");
  fit->add_option("--speed-model", speed, "constant | quadratic")
      ->check(CLI::IsMember({"constant", "quadratic"}));
  fit->add_option("--prior-file", prior, "JSON prior overrides");
  fit->add_option("--format", format, "report format: text | structured | both")
      ->check(CLI::IsMember({"text", "structured", "both"}));

  // simulate ----------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Generate a dataset from the model");
  jrt::SimSpec sim;
  std::uint64_t sim_seed = 1;
  std::string sim_out, sim_speed = "constant";
  int pre_groups = 0, pre_common = 170, pre_block = 10;
  simulate->add_option("--n", sim.n, "persons")->required();
  simulate->add_option("--k", sim.k, "items")->required();
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_option("--seed", sim_seed, "RNG seed");
  simulate->add_flag("--guess", sim.guess, "include guessing");
  simulate->add_option("--rho", sim.rho, "ability-speed correlation");
  simulate->add_option("--sigma2-min", sim.sigma2_min, "lower bound of error variances");
  simulate->add_option("--sigma2-max", sim.sigma2_max, "upper bound of error variances");
  simulate->add_option("--mar-y", sim.missing.mar_frac_y, "MAR fraction for Y");
  simulate->add_option("--mar-rt", sim.missing.mar_frac_rt, "MAR fraction for RT");
  simulate->add_option("--speed-model", sim_speed, "constant | quadratic")
      ->check(CLI::IsMember({"constant", "quadratic"}));
  simulate->add_option("--pretest-groups", pre_groups,
                       "simulate an incomplete pretest design with this many groups");
  simulate->add_option("--pretest-common", pre_common, "items administered to everyone");
  simulate->add_option("--pretest-block", pre_block, "pretest items per group");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      spec.y_path = y_path;
      spec.rt_path = rt_path;
      spec.out_dir = out_dir;
      auto opt = [](const std::string& s) {
        return s.empty() ? std::optional<fs::path>{} : std::optional<fs::path>{s};
      };
      spec.mbdy_path = opt(mbdy);
      spec.mbdt_path = opt(mbdt);
      spec.xpa_path = opt(xpa);
      spec.xpt_path = opt(xpt);
      spec.xia_path = opt(xia);
      spec.xit_path = opt(xit);
      spec.fixed_a_path = opt(fa);
      spec.fixed_b_path = opt(fb);
      spec.fixed_phi_path = opt(fphi);
      spec.fixed_lambda_path = opt(flam);
      spec.item_order_path = opt(order);
      spec.prior_path = opt(prior);
      return run_fit(spec, format, speed);
    }
    if (*simulate) {
      sim.speed_model = sim_speed == "quadratic" ? jrt::SpeedModel::kQuadratic
                                                 : jrt::SpeedModel::kConstant;
      return run_simulate(sim, sim_seed, sim_out, pre_groups, pre_common, pre_block);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
