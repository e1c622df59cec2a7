#include "qsd/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "qsd/errors.hpp"

namespace qsd {

double decay_estimate(std::span<const Particle> particles, const Model& model) {
  double alpha = 0.0;
  for (const auto& p : particles) {
    if (p.state != kAbsorbed && p.weight != 0.0) alpha += model.absorption_rate(p.state) * p.weight;
  }
  return alpha;
}

double decay_estimate(const SampleRecord& sample, const Model& model) {
  double alpha = 0.0;
  for (const auto& s : sample.survivors) alpha += model.absorption_rate(s.state) * s.weight;
  return alpha;
}

double decay_estimate(const Distribution& distribution, const Model& model) {
  double alpha = 0.0;
  for (const auto& [state, w] : distribution) {
    if (state != kAbsorbed && w != 0.0) alpha += model.absorption_rate(state) * w;
  }
  return alpha;
}

AlphaTrace alpha_trace(const RunLog& log, const Model& model) {
  if (log.samples.empty()) throw EmptyLog();
  AlphaTrace trace;
  for (const auto& sample : log.samples) {
    trace.times.push_back(sample.time);
    trace.estimates.push_back(decay_estimate(sample, model));
  }
  double sum = 0.0;
  for (double a : trace.estimates) sum += a;
  trace.pooled = sum / static_cast<double>(trace.estimates.size());
  return trace;
}

double tv_distance(const Distribution& p, const Distribution& q) {
  auto check = [](const Distribution& d) {
    double total = 0.0;
    for (const auto& [s, w] : d) {
      if (w < 0.0) throw ContractViolation("tv_distance: negative probability");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractViolation("tv_distance: input is not normalized");
  };
  check(p);
  check(q);
  double d = 0.0;
  auto pi = p.begin();
  auto qi = q.begin();
  while (pi != p.end() || qi != q.end()) {
    if (qi == q.end() || (pi != p.end() && pi->first < qi->first)) {
      d += std::abs(pi->second);
      ++pi;
    } else if (pi == p.end() || qi->first < pi->first) {
      d += std::abs(qi->second);
      ++qi;
    } else {
      d += std::abs(pi->second - qi->second);
      ++pi;
      ++qi;
    }
  }
  return std::min(1.0, 0.5 * d);
}

std::vector<TracePoint> cumulative_mean_trace(const RunLog& log, const Model& model, const StateStatistic& statistic) {
  if (log.samples.empty()) throw EmptyLog();
  std::vector<TracePoint> trace;
  double running = 0.0;
  std::size_t k = 0;
  for (const auto& sample : log.samples) {
    double mean = 0.0;
    for (const auto& s : sample.survivors) {
      const double value = statistic ? statistic(s.state) : static_cast<double>(model.coordinate(s.state));
      mean += value * s.weight;
    }
    ++k;
    running += (mean - running) / static_cast<double>(k);
    trace.push_back({sample.time, running});
  }
  return trace;
}

std::uint64_t max_occupied_coordinate(const RunLog& log, const Model& model) {
  std::uint64_t best = 0;
  for (const auto& sample : log.samples) {
    for (const auto& s : sample.survivors) {
      if (s.weight > 0.0) best = std::max(best, model.coordinate(s.state));
    }
  }
  return best;
}

}  // namespace qsd
