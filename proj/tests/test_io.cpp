#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "jrt/io.hpp"
#include "jrt/simulate.hpp"

using namespace jrt;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "jrt_io_test";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
  const fs::path p = temp_dir() / name;
  std::ofstream os(p);
  os << content;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("csv loader: NA and empty cells become missing; header detected") {
  const fs::path p = write_file("m1.csv", "c1,c2,c3\n1,NA,0\n0,1,\n");
  const Eigen::MatrixXd m = io::load_matrix_csv(p, io::MatrixKind::kBinary);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(0, 0) == 1.0);
  CHECK(is_missing(m(0, 1)));
  CHECK(is_missing(m(1, 2)));
}

TEST_CASE("csv loader rejects ragged rows and bad tokens with coordinates") {
  const fs::path ragged = write_file("m2.csv", "1,0\n1,0,1\n");
  CHECK_THROWS_WITH_AS(io::load_matrix_csv(ragged, io::MatrixKind::kReal),
                       doctest::Contains("ragged row on line 2"), std::runtime_error);
  const fs::path bad = write_file("m3.csv", "1,0\n1,x\n");
  CHECK_THROWS_WITH_AS(io::load_matrix_csv(bad, io::MatrixKind::kReal),
                       doctest::Contains("non-numeric"), std::runtime_error);
  const fs::path nonbinary = write_file("m4.csv", "1,0\n1,2\n");
  CHECK_THROWS_WITH_AS(io::load_matrix_csv(nonbinary, io::MatrixKind::kBinary),
                       doctest::Contains("row 2, column 2"), std::runtime_error);
  const fs::path mask_na = write_file("m5.csv", "1,0\n1,NA\n");
  CHECK_THROWS_AS(io::load_matrix_csv(mask_na, io::MatrixKind::kMask), std::runtime_error);
}

TEST_CASE("log transform of raw seconds") {
  Eigen::MatrixXd raw(1, 2);
  raw << std::exp(1.0), std::exp(2.0);
  const Eigen::MatrixXd logged = io::log_transform_rt(raw, "rt");
  CHECK(logged(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(logged(0, 1) == doctest::Approx(2.0).epsilon(1e-12));

  Eigen::MatrixXd zero(1, 2);
  zero << 4.0, 0.0;
  CHECK_THROWS_WITH_AS(io::log_transform_rt(zero, "rt"),
                       doctest::Contains("convert zero or negative times to NA"),
                       std::runtime_error);
}

TEST_CASE("matrix round trip is lossless up to missing-token normalization") {
  Eigen::MatrixXd m(2, 3);
  m << 0.12345678901234567, -3.5, std::numeric_limits<double>::quiet_NaN(), 1e-17, 42.0, 0.0;
  const fs::path p = temp_dir() / "rt.csv";
  io::write_matrix_csv(p, m);
  const Eigen::MatrixXd back = io::load_matrix_csv(p, io::MatrixKind::kReal);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) {
      if (is_missing(m(i, j)))
        CHECK(is_missing(back(i, j)));
      else
        CHECK(back(i, j) == m(i, j));  // exact: %.17g round-trips doubles
    }
}

TEST_CASE("run_job completes with defaults and reproduces chain files from the manifest seed") {
  // Simulate a small dataset, write CSVs, run the job twice.
  SimSpec spec;
  spec.n = 25;
  spec.k = 5;
  Rng rng(3);
  const SimResult sim = simulate_dataset(spec, rng);
  const fs::path dir = temp_dir();
  io::write_matrix_csv(dir / "y.csv", sim.data.y);
  io::write_matrix_csv(dir / "rt.csv", sim.data.rt);

  io::JobSpec job;
  job.y_path = dir / "y.csv";
  job.rt_path = dir / "rt.csv";
  job.config.xg = 60;
  job.config.seed = 12;
  job.out_dir = dir / "out1";
  std::ostringstream log1;
  CHECK(io::run_job(job, log1) == 0);
  CHECK(fs::exists(job.out_dir / "chain_b.csv"));
  CHECK(fs::exists(job.out_dir / "summary.txt"));
  CHECK(fs::exists(job.out_dir / "report.json"));
  CHECK(fs::exists(job.out_dir / "manifest.json"));

  // Manifest carries the seed; a rerun reproduces the chain files exactly.
  const auto manifest = nlohmann::json::parse(slurp(job.out_dir / "manifest.json"));
  io::JobSpec rerun = job;
  rerun.config.seed = manifest["seed"].get<std::uint64_t>();
  rerun.out_dir = dir / "out2";
  std::ostringstream log2;
  CHECK(io::run_job(rerun, log2) == 0);
  for (const char* f : {"chain_a.csv", "chain_b.csv", "chain_lambda.csv", "chain_theta.csv"})
    CHECK(slurp(job.out_dir / f) == slurp(rerun.out_dir / f));

  // Text labels required in the population block.
  const std::string summary = slurp(job.out_dir / "summary.txt");
  for (const char* label : {"mu_a", "mu_b", "mu_phi", "mu_lam"})
    CHECK(summary.find(label) != std::string::npos);
  // No fit requested: the residual section is absent.
  CHECK(summary.find("Residual Analysis") == std::string::npos);
  const auto rep = nlohmann::json::parse(slurp(job.out_dir / "report.json"));
  CHECK(rep["residual_analysis"].is_null());
}

TEST_CASE("run_job rejects an inconsistent residual configuration before writing output") {
  SimSpec spec;
  spec.n = 10;
  spec.k = 4;
  Rng rng(5);
  const SimResult sim = simulate_dataset(spec, rng);
  const fs::path dir = temp_dir();
  io::write_matrix_csv(dir / "y3.csv", sim.data.y);
  io::write_matrix_csv(dir / "rt3.csv", sim.data.rt);
  io::JobSpec job;
  job.y_path = dir / "y3.csv";
  job.rt_path = dir / "rt3.csv";
  job.config.xg = 500;
  job.config.residual = true;
  job.config.xgresid = 1000;
  job.out_dir = dir / "out_invalid";
  std::ostringstream log;
  CHECK(io::run_job(job, log) == 2);
  CHECK(log.str().find("XG > XGresid") != std::string::npos);
  CHECK(!fs::exists(job.out_dir));  // no partial output
}

TEST_CASE("structured and text reports carry the same numbers") {
  SimSpec spec;
  spec.n = 30;
  spec.k = 4;
  Rng rng(7);
  const SimResult sim = simulate_dataset(spec, rng);
  RunConfig cfg;
  cfg.xg = 200;
  cfg.residual = true;
  cfg.xgresid = 100;
  const ChainStore chain = run_chain(sim.data, cfg, Priors::defaults());
  const SummaryTable summary = summarize(chain, cfg.burnin);
  std::ostringstream text;
  io::emit_report_text(text, chain, summary, &*chain.fit);
  CHECK(text.str().find("Residual Analysis") != std::string::npos);

  const auto rep = nlohmann::json::parse(io::report_json(chain, summary, &*chain.fit));
  // Compare a few EAPs against the text rendering at the printed precision.
  for (const auto& row : rep["parameters"]) {
    if (row["name"] == "b.1") {
      const double eap = row["eap"].get<double>();
      const ParamSummary* s = summary.find("b.1");
      CHECK(eap == s->eap);  // structured output is lossless
      std::ostringstream want;
      want << std::fixed << std::setprecision(3) << eap;
      CHECK(text.str().find(want.str().substr(0, 5)) != std::string::npos);
    }
  }
  CHECK(rep["residual_analysis"]["pct_rt_flagged"].is_number());
}

TEST_CASE("file digest is stable and content-sensitive") {
  const fs::path a = write_file("d1.csv", "1,2,3\n");
  const fs::path b = write_file("d2.csv", "1,2,3\n");
  const fs::path c = write_file("d3.csv", "1,2,4\n");
  CHECK(io::file_digest(a) == io::file_digest(b));
  CHECK(io::file_digest(a) != io::file_digest(c));
  CHECK(io::file_digest(a).size() == 16);
}
