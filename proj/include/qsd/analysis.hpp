#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qsd/engine.hpp"
#include "qsd/ensemble.hpp"
#include "qsd/models.hpp"

namespace qsd {

/// Sum over particles of absorption_rate(state) * weight. Linear in the
/// weights; no normalization is applied.
double decay_estimate(std::span<const Particle> particles, const Model& model);
double decay_estimate(const SampleRecord& sample, const Model& model);
double decay_estimate(const Distribution& distribution, const Model& model);

struct AlphaTrace {
  std::vector<double> times;
  std::vector<double> estimates;
  double pooled = 0.0;  // equal weight per sampling time
};

/// Throws EmptyLog for a log without samples.
AlphaTrace alpha_trace(const RunLog& log, const Model& model);

/// Half the L1 distance over the union support. Throws ContractViolation
/// unless both inputs sum to 1 within 1e-9.
double tv_distance(const Distribution& p, const Distribution& q);

using StateStatistic = std::function<double(StateCode)>;

struct TracePoint {
  double time = 0.0;
  double value = 0.0;
};

/// Running mean over sampling times of the weighted mean of `statistic`
/// (default: Model::coordinate). Throws EmptyLog.
std::vector<TracePoint> cumulative_mean_trace(const RunLog& log, const Model& model,
                                              const StateStatistic& statistic = {});

/// Largest coordinate carrying positive weight over every sample of the log.
std::uint64_t max_occupied_coordinate(const RunLog& log, const Model& model);

}  // namespace qsd
