#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "jrt/chain_analysis.hpp"
#include "jrt/diagnostics.hpp"
#include "jrt/gibbs.hpp"
#include "jrt/model.hpp"

namespace jrt::io {

enum class MatrixKind { kBinary, kReal, kMask };

/// Parse a rectangular CSV (optional header row). "NA" and empty cells become
/// missing. kBinary/kMask reject values outside {0, 1} with cell coordinates.
Eigen::MatrixXd load_matrix_csv(const std::filesystem::path& path, MatrixKind kind);

/// Natural log of every observed entry; nonpositive values are rejected with
/// guidance to pre-clean them (convert to NA) before loading.
Eigen::MatrixXd log_transform_rt(const Eigen::MatrixXd& raw, const std::string& label);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& col_names = {});

/// FNV-1a 64-bit digest of a file's bytes, as hex.
std::string file_digest(const std::filesystem::path& path);

enum class ReportFormat { kText, kStructured, kBoth };

struct JobSpec {
  std::filesystem::path y_path, rt_path;
  std::optional<std::filesystem::path> mbdy_path, mbdt_path;
  std::optional<std::filesystem::path> xpa_path, xpt_path, xia_path, xit_path;
  std::optional<std::filesystem::path> fixed_a_path, fixed_b_path, fixed_phi_path,
      fixed_lambda_path;
  std::optional<std::filesystem::path> item_order_path;
  std::optional<std::filesystem::path> prior_path;  // JSON overrides
  bool log_rt = false;
  RunConfig config;
  std::filesystem::path out_dir;
  ReportFormat format = ReportFormat::kBoth;
};

/// Load inputs, validate, run the chain, and write chain files, summary,
/// fit report (when enabled), and a reproducibility manifest. Returns the
/// process exit status (0 on success).
int run_job(const JobSpec& spec, std::ostream& log);

void emit_report_text(std::ostream& os, const ChainStore& chain, const SummaryTable& summary,
                      const diag::FitReport* fit);
std::string report_json(const ChainStore& chain, const SummaryTable& summary,
                        const diag::FitReport* fit);

}  // namespace jrt::io
