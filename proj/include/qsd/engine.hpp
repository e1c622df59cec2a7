#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qsd/ensemble.hpp"
#include "qsd/models.hpp"
#include "qsd/resampling.hpp"
#include "qsd/rng.hpp"

namespace qsd {

struct Deterministic {
  double t_step = 1.0;
  friend bool operator==(const Deterministic&, const Deterministic&) = default;
};

/// Resample when any seeded region l drops to max(lambda * N_l, 1) particles,
/// or t_max after the previous resample. lambda = 0 disables count triggers.
struct Dynamic {
  double trigger_fraction = 0.2;
  double t_max = std::numeric_limits<double>::infinity();
  friend bool operator==(const Dynamic&, const Dynamic&) = default;
};

struct Schedule {
  double t_end = 1.0;
  std::variant<Deterministic, Dynamic> mode = Deterministic{};
  double burn_in = 0.0;
  double sample_delay = 1.0;

  bool is_dynamic() const noexcept { return std::holds_alternative<Dynamic>(mode); }
  /// Throws ConfigError. Discrete-time models need integral times.
  void validate(TimeKind kind) const;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct WeightedState {
  StateCode state = kAbsorbed;
  double weight = 0.0;
};

/// Normalized surviving particles at one sampling time.
struct SampleRecord {
  double time = 0.0;
  std::vector<WeightedState> survivors;
};

/// Region occupancy just before a resampling event.
struct RegionTraceRow {
  double time = 0.0;
  std::size_t region = 0;
  std::size_t count = 0;
  double weight = 0.0;
};

struct SurvivorTraceRow {
  double time = 0.0;
  std::size_t before = 0;
  std::size_t after = 0;
};

struct RunFailure {
  std::string kind;
  std::string message;
  double time = 0.0;
  std::optional<std::size_t> region;
};

struct RunLog {
  std::vector<SampleRecord> samples;
  std::vector<double> resample_times;
  std::vector<RegionTraceRow> region_traces;
  std::vector<SurvivorTraceRow> survivor_trace;
  std::optional<RunFailure> failure;

  bool ok() const noexcept { return !failure.has_value(); }
};

struct RunSetup {
  Model model;
  Schedule schedule;
  ResamplerSpec resampler;
  std::size_t particles = 100;
  InitialDistribution initial;
  /// Required by regional resamplers; otherwise used only for region traces.
  std::optional<Partition> partition;

  /// Throws ConfigError (or ContractViolation from the model layer).
  void validate() const;
};

/// M particles drawn from the initial law, each of weight 1/M.
Ensemble initialize(const Model& model, const InitialDistribution& initial, std::size_t count, Rng& rng);

/// Propagates every surviving particle to time t. Newly absorbed particles
/// get weight zero; survivors keep their weight. Pending continuous-time
/// events are kept in Particle::next_event_time.
void advance_to(Ensemble& ensemble, const Model& model, double t, Rng& rng);

RunLog run_deterministic(const RunSetup& setup, Rng& rng);
RunLog run_dynamic(const RunSetup& setup, Rng& rng);

/// Validates the setup and dispatches on the schedule mode.
RunLog run(const RunSetup& setup, Rng& rng);

/// Pools the log's samples; every sampling time carries equal total weight.
/// Throws EmptyLog when there are none.
Distribution collect_samples(const RunLog& log);

/// Pools the samples of several logs; every sampling time of every log
/// carries equal total weight.
Distribution collect_samples(const std::vector<RunLog>& logs);

}  // namespace qsd
