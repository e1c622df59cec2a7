#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qsd/config.hpp"
#include "qsd/engine.hpp"
#include "qsd/oracle.hpp"

namespace qsd {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSampler = 3,
  kExitThreshold = 4,
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "QSD_OUTPUT_DIR";

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 1;
  // compare only
  std::optional<std::string> run_csv;
  std::optional<std::string> oracle_csv;
  std::optional<double> threshold;
};

/// --out, else the config's output_dir, else $QSD_OUTPUT_DIR, else "qsd-output".
std::string resolve_output_dir(const ExperimentConfig& config, const CommandOptions& options);

/// Runs `replications` independent runs; replication r uses
/// replication_seed(seed, r). Results are ordered by replication whatever
/// the thread count.
std::vector<RunLog> run_replications(const RunSetup& setup, std::uint64_t seed, std::size_t replications,
                                     unsigned threads);

/// Picks the oracle matching the model and initial law.
OracleResult compute_oracle(const ExperimentConfig& config);

struct HistogramRow {
  StateCode code = 0;
  std::string state;
  double probability = 0.0;
};

/// 17 significant digits, round-trippable.
std::string format_double(double x);

void write_histogram(const std::string& path, const Distribution& d, const Model& model);
std::vector<HistogramRow> read_histogram(const std::string& path);

/// The commands print a short report to `out` and diagnostics to `err`.
int cmd_run(const ExperimentConfig& config, const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_oracle(const ExperimentConfig& config, const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_compare(const ExperimentConfig& config, const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const ExperimentConfig& config, const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Compares two histogram CSVs; writes comparison.csv next to `report_path`
/// when it is non-empty. Returns kExitThreshold when TV exceeds `threshold`.
int compare_files(const std::string& run_csv, const std::string& oracle_csv, double threshold,
                  const std::string& report_path, std::ostream& out, std::ostream& err);

}  // namespace qsd
