#pragma once

// CSV ingestion and emission, riboflavin-style design construction, the flat
// key/value config format, and the report tables.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cme/model.hpp"
#include "cme/simulation.hpp"

namespace cme::io {

namespace fs = std::filesystem;

// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double v);

// Parses a full cell as a double; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view cell);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(std::string_view column) const;
  // Throws DataError naming the column when absent.
  std::size_t require(std::string_view column) const;
};

// Comma separated, first line is the header. Double quotes around a cell are
// stripped; embedded commas inside quotes are honoured. Row numbers in errors
// are 1-based file lines.
CsvTable read_csv(const fs::path& path);
CsvTable parse_csv(std::string_view text, const std::string& source = "<memory>");

// Writes `content` to a temporary sibling and renames it over `path`.
void write_atomic(const fs::path& path, const std::string& content);

void write_matrix_csv(const fs::path& path, const std::vector<std::string>& header, const MatrixXd& values);
MatrixXd read_matrix_csv(const fs::path& path, std::vector<std::string>* header = nullptr);

// Long format: one row per observation.
//   subject, obs, y, x1..xp, z1..zq
struct LongSchema {
  std::string subject = "subject";
  std::string y = "y";
  std::vector<std::string> x_columns;  // empty: every column named x<digits>
  std::vector<std::string> z_columns;  // empty: every column named z<digits>
  bool require_response = true;
};

// Rows of one subject need not be adjacent; subjects keep the order of their
// first appearance and rows keep file order within a subject.
DataSet load_csv_long(const fs::path& path, const LongSchema& schema = {});
DataSet table_to_dataset(const CsvTable& table, const LongSchema& schema, const std::string& source);
std::string dataset_to_csv(const DataSet& d);
void write_csv_long(const fs::path& path, const DataSet& d);

struct RiboflavinSchema {
  std::string subject = "subject";
  std::string y = "y";
  std::string time = "time";
  std::vector<std::string> genes;  // empty: every remaining column
  bool require_response = true;
};

struct RiboflavinDesign {
  DataSet data;                    // Z_i = X_i
  std::vector<std::string> columns;  // intercept, gene names, spline1..3
  double time_lo = 0;
  double time_hi = 0;
};

// X_i = [1, standardised genes, cubic B-spline basis of time]. Genes are
// centred and scaled (sample sd) over all rows before any split; the spline
// knots span the global time range.
RiboflavinDesign build_riboflavin_design(const CsvTable& table, const RiboflavinSchema& schema = {},
                                         Index n_spline = 3);

// Subject-level random split, deterministic in `seed`.
std::pair<DataSet, DataSet> split_train_test(const DataSet& d, Index n_train, std::uint64_t seed);

// ---- config ----
//
//   # comment
//   [fit]       k1 k2 iterations burn_in thin seed s2m_tol
//   [prior]     a0 b0 sigma2_gamma
//   [scenario]  p q n m sigma x_design replications test_subjects tau0_sq with_oracle
//   [geweke]    n m p q k1 k2 samples burn_in batches seed a0 b0 sigma2_gamma
//
// The chain settings of [fit] and [prior] also drive the simulation scenario.
struct RunConfig {
  FitConfig fit;
  SimScenario scenario;
  GewekeConfig geweke;
  std::vector<std::pair<std::string, std::string>> echo;  // section.key, value as read
};

RunConfig parse_config(std::string_view text, const std::string& source = "<memory>");
RunConfig load_config(const fs::path& path);
// Copies fit/prior settings onto the scenario.
void sync_scenario(RunConfig& cfg);

// ---- draws and summaries ----

void write_draws(const fs::path& dir, const PosteriorDraws& draws);
PosteriorDraws read_draws(const fs::path& dir);

// coefficient, mean, median, q2.5, q97.5
std::string summary_csv(const MatrixXd& draws, const std::string& prefix);

// ---- metrics ----

std::vector<std::string> metrics_header();
std::string metrics_row(const ReplicationMetrics& r);
std::string metrics_csv(const std::vector<ReplicationMetrics>& rows);
std::vector<ReplicationMetrics> read_metrics_csv(const fs::path& path);

// Table-1 layout: sigma, method, k1, then one "TPR (FPR)" cell per (k2, m).
std::string table1_csv(const std::vector<ReplicationMetrics>& rows);
// Table-2 layout: sigma, k1, then one "coverage (relative width)" cell per (k2, m).
std::string table2_csv(const std::vector<ReplicationMetrics>& rows);

}  // namespace cme::io
