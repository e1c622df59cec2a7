#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qsd/models.hpp"
#include "qsd/rng.hpp"

namespace qsd {

/// Weighted histogram or reference distribution over states.
using Distribution = std::map<StateCode, double>;

/// Marker for a continuous-time particle without a pending event.
inline constexpr double kUnscheduled = -1.0;

struct Particle {
  StateCode state = kAbsorbed;
  double weight = 0.0;
  double next_event_time = kUnscheduled;
};

struct Ensemble {
  std::vector<Particle> particles;
  double clock = 0.0;

  std::size_t size() const noexcept { return particles.size(); }
};

double total_weight(std::span<const Particle> particles) noexcept;
std::size_t survivor_count(std::span<const Particle> particles) noexcept;

/// Scales weights to sum to 1. Throws AllAbsorbed when the total is zero.
void normalize(std::span<Particle> particles);

/// Effective sample size 1 / sum(W_i^2) of the normalized weights.
double ess(std::span<const Particle> particles);

/// Closed interval [lo, hi] on a model's state coordinate; hi unset = unbounded.
struct Interval {
  std::uint64_t lo = 0;
  std::optional<std::uint64_t> hi;

  bool contains(std::uint64_t x) const noexcept { return x >= lo && (!hi || x <= *hi); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Partition of the transient states into regions, each a union of
/// intervals over Model::coordinate.
class Partition {
 public:
  Partition() = default;
  /// Throws ContractViolation if regions are empty or overlap.
  explicit Partition(std::vector<std::vector<Interval>> regions);

  std::size_t size() const noexcept { return regions_.size(); }
  const std::vector<std::vector<Interval>>& regions() const noexcept { return regions_; }

  /// Region containing a transient state; nullopt for absorbed or uncovered states.
  std::optional<std::size_t> region_of(StateCode state, const Model& model) const noexcept;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<std::vector<Interval>> regions_;
};

struct RegionSummary {
  std::vector<std::size_t> counts;
  std::vector<double> weights;
};

RegionSummary region_summary(std::span<const Particle> particles, const Partition& partition, const Model& model);

using ParticleResampler = std::function<std::vector<Particle>(std::span<const Particle>, Rng&)>;
using TestFunction = std::function<double(StateCode)>;

struct ProperVerdict {
  double expected = 0.0;   // c * sum_j h(X_j) w_j
  double mean = 0.0;       // replication mean of sum_j h(X'_j) w'_j
  double std_error = 0.0;  // standard error of mean - expected
  double normalizer = 1.0;
  bool pass = false;
};

/// Monte Carlo check of proper weighting: for each test
/// function h, E[sum h(X')w'] must equal c * sum h(X)w within 4 standard
/// errors. With `normalizer` unset, c is taken per replication from the
/// output's total weight, so only the shape of the weighting is tested.
std::vector<ProperVerdict> check_proper(std::span<const Particle> before, const ParticleResampler& resampler,
                                        std::span<const TestFunction> tests, std::size_t replications, Rng& rng,
                                        std::optional<double> normalizer = 1.0);

}  // namespace qsd
