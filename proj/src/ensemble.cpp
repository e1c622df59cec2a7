#include "qsd/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "qsd/errors.hpp"

namespace qsd {

double total_weight(std::span<const Particle> particles) noexcept {
  double total = 0.0;
  for (const auto& p : particles) total += p.weight;
  return total;
}

std::size_t survivor_count(std::span<const Particle> particles) noexcept {
  return static_cast<std::size_t>(
      std::count_if(particles.begin(), particles.end(), [](const Particle& p) { return p.state != kAbsorbed; }));
}

void normalize(std::span<Particle> particles) {
  const double total = total_weight(particles);
  if (!(total > 0.0)) throw AllAbsorbed();
  for (auto& p : particles) p.weight /= total;
}

double ess(std::span<const Particle> particles) {
  const double total = total_weight(particles);
  if (!(total > 0.0)) throw AllAbsorbed();
  double squares = 0.0;
  for (const auto& p : particles) {
    const double w = p.weight / total;
    squares += w * w;
  }
  return 1.0 / squares;
}

Partition::Partition(std::vector<std::vector<Interval>> regions) : regions_(std::move(regions)) {
  std::vector<Interval> all;
  for (const auto& region : regions_) {
    if (region.empty()) throw ContractViolation("partition region without intervals");
    for (const auto& iv : region) {
      if (iv.hi && *iv.hi < iv.lo) throw ContractViolation("partition interval with hi < lo");
      all.push_back(iv);
    }
  }
  std::sort(all.begin(), all.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  for (std::size_t k = 1; k < all.size(); ++k) {
    if (!all[k - 1].hi || *all[k - 1].hi >= all[k].lo) throw ContractViolation("partition regions overlap");
  }
}

std::optional<std::size_t> Partition::region_of(StateCode state, const Model& model) const noexcept {
  if (model.is_absorbed(state)) return std::nullopt;
  const std::uint64_t x = model.coordinate(state);
  for (std::size_t l = 0; l < regions_.size(); ++l) {
    for (const auto& iv : regions_[l]) {
      if (iv.contains(x)) return l;
    }
  }
  return std::nullopt;
}

RegionSummary region_summary(std::span<const Particle> particles, const Partition& partition, const Model& model) {
  RegionSummary summary{std::vector<std::size_t>(partition.size(), 0), std::vector<double>(partition.size(), 0.0)};
  for (const auto& p : particles) {
    if (auto l = partition.region_of(p.state, model)) {
      ++summary.counts[*l];
      summary.weights[*l] += p.weight;
    }
  }
  return summary;
}

std::vector<ProperVerdict> check_proper(std::span<const Particle> before, const ParticleResampler& resampler,
                                        std::span<const TestFunction> tests, std::size_t replications, Rng& rng,
                                        std::optional<double> normalizer) {
  const double before_total = total_weight(before);
  if (!(before_total > 0.0)) throw ContractViolation("check_proper needs positive total weight");
  if (replications < 2) throw ContractViolation("check_proper needs at least two replications");

  const std::size_t n = tests.size();
  std::vector<double> reference(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& p : before) reference[k] += tests[k](p.state) * p.weight;
  }

  // Welford accumulators for Y = sum h w' and Z = Y - c * reference.
  std::vector<double> mean_y(n, 0.0);
  std::vector<double> mean_z(n, 0.0);
  std::vector<double> m2_z(n, 0.0);
  double mean_c = 0.0;
  for (std::size_t r = 0; r < replications; ++r) {
    const auto after = resampler(before, rng);
    const double c = normalizer ? *normalizer : total_weight(after) / before_total;
    mean_c += (c - mean_c) / static_cast<double>(r + 1);
    for (std::size_t k = 0; k < n; ++k) {
      double y = 0.0;
      for (const auto& p : after) y += tests[k](p.state) * p.weight;
      const double z = y - c * reference[k];
      const auto count = static_cast<double>(r + 1);
      mean_y[k] += (y - mean_y[k]) / count;
      const double delta = z - mean_z[k];
      mean_z[k] += delta / count;
      m2_z[k] += delta * (z - mean_z[k]);
    }
  }

  std::vector<ProperVerdict> verdicts(n);
  const auto reps = static_cast<double>(replications);
  for (std::size_t k = 0; k < n; ++k) {
    auto& v = verdicts[k];
    v.normalizer = mean_c;
    v.expected = mean_c * reference[k];
    v.mean = mean_y[k];
    v.std_error = std::sqrt(m2_z[k] / (reps - 1.0) / reps);
    const double slack = 1e-12 * std::max(1.0, std::abs(v.expected));
    v.pass = std::abs(mean_z[k]) <= 4.0 * v.std_error + slack;
  }
  return verdicts;
}

}  // namespace qsd
