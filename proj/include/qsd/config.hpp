#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsd/engine.hpp"
#include "qsd/models.hpp"
#include "qsd/resampling.hpp"

namespace qsd {

inline constexpr const char* kConfigSchema = "qsd-experiment/1";

struct OracleOptions {
  std::string target = "lcd";  // "lcd" or "alpha"
  std::uint64_t truncation = 200;
  double tol = 1e-8;
  friend bool operator==(const OracleOptions&, const OracleOptions&) = default;
};

struct SweepSpec {
  std::string parameter;        // "lambda", "t_max" or "beta"
  std::vector<double> values;
  std::string estimate = "alpha";  // "alpha" or "mean" (mean coordinate)
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct ExperimentConfig {
  ModelSpec model;
  InitialDistribution initial;
  std::optional<Partition> regions;
  Schedule schedule;
  ResamplerSpec resampler;
  std::size_t particles = 100;
  std::uint64_t seed = 1;
  std::size_t replications = 1;
  std::string output_dir;
  OracleOptions oracle;
  std::optional<SweepSpec> sweep;
  double compare_threshold = 0.1;

  /// Throws ConfigError describing the offending field.
  void validate() const;
  RunSetup setup() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses and validates a JSON config. Syntax errors report the line and
/// column; field errors report a JSON pointer such as /schedule/t_step.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Pretty-printed JSON accepted by parse_config.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace qsd
