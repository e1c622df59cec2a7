#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qsd/ensemble.hpp"
#include "qsd/errors.hpp"
#include "qsd/models.hpp"
#include "qsd/rng.hpp"

namespace qsd {

enum class ResamplerKind { None, Multinomial, Residual, Refill, CombineSplit, Regional };

/// Where combine-split sends the particles freed by the combine step.
enum class Reallocation { UniformOverLocations, ProportionalToWeight };

struct ResamplerSpec {
  ResamplerKind kind = ResamplerKind::Multinomial;
  Reallocation realloc = Reallocation::UniformOverLocations;
  std::vector<std::size_t> targets;            // Regional: N_1..N_L
  std::shared_ptr<const ResamplerSpec> inner;  // Refill, Regional

  static ResamplerSpec none() { return {ResamplerKind::None, {}, {}, nullptr}; }
  static ResamplerSpec multinomial() { return {ResamplerKind::Multinomial, {}, {}, nullptr}; }
  static ResamplerSpec residual() { return {ResamplerKind::Residual, {}, {}, nullptr}; }
  static ResamplerSpec refill(ResamplerSpec inner) {
    return {ResamplerKind::Refill, {}, {}, std::make_shared<const ResamplerSpec>(std::move(inner))};
  }
  static ResamplerSpec combine_split(Reallocation realloc = Reallocation::UniformOverLocations) {
    return {ResamplerKind::CombineSplit, realloc, {}, nullptr};
  }
  static ResamplerSpec regional(std::vector<std::size_t> targets, ResamplerSpec inner) {
    return {ResamplerKind::Regional, {}, std::move(targets), std::make_shared<const ResamplerSpec>(std::move(inner))};
  }

  friend bool operator==(const ResamplerSpec& a, const ResamplerSpec& b);
};

/// Structural checks against the run size and region count. `dynamic`
/// additionally requires a regional spec with every N_l >= 2.
void validate(const ResamplerSpec& spec, std::size_t particle_count, std::size_t region_count, bool dynamic);

/// Indices drawn with replacement, probability proportional to weight.
/// Returned in ascending order.
std::vector<std::size_t> multinomial_indices(std::span<const double> weights, std::size_t count, Rng& rng);

/// floor(count * W_i) deterministic copies, remainder multinomial on the
/// fractional parts. Ascending order.
std::vector<std::size_t> residual_indices(std::span<const double> weights, std::size_t count, Rng& rng);

/// `count` draws; each carries weight (input total) / count.
std::vector<Particle> multinomial(std::span<const Particle> particles, std::size_t count, Rng& rng);
std::vector<Particle> residual(std::span<const Particle> particles, std::size_t count, Rng& rng);

/// Replaces every absorbed particle with a donor chosen among the survivors
/// by `inner` (Multinomial or Residual). Survivors are left untouched and a
/// refilled slot takes the survivors' mean weight, so the output is not
/// normalized: its total is (input total) * M / survivors.
std::vector<Particle> refill(std::span<const Particle> particles, ResamplerKind inner, Rng& rng);

/// Combine-split on parallel state/weight arrays with an injectable
/// reallocation rule. `draw(masses)` returns an index into the occupied
/// locations (in order of first appearance); `masses` are the combined
/// location weights. Weight type is generic so exact arithmetic can be used.
///
/// The lowest-index particle at each occupied location anchors it; every
/// other slot (duplicates, absorbed, zero weight) is reallocated in index
/// order. Per-location total weight is conserved exactly.
template <class Weight, class Draw>
void combine_split_core(std::span<StateCode> states, std::span<Weight> weights, Draw&& draw) {
  if (states.size() != weights.size()) throw ContractViolation("combine_split: size mismatch");
  const Weight zero{};
  std::unordered_map<StateCode, std::size_t> slot_of;
  std::vector<StateCode> locations;
  std::vector<Weight> masses;
  std::vector<bool> anchor(states.size(), false);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == kAbsorbed || !(zero < weights[i])) continue;
    auto [it, inserted] = slot_of.try_emplace(states[i], locations.size());
    if (inserted) {
      locations.push_back(states[i]);
      masses.push_back(weights[i]);
    } else {
      masses[it->second] += weights[i];
    }
  }
  if (locations.empty()) throw AllAbsorbed();

  // Anchor: lowest index at each occupied location.
  std::vector<bool> anchored(locations.size(), false);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == kAbsorbed) continue;
    auto it = slot_of.find(states[i]);
    if (it != slot_of.end() && !anchored[it->second]) {
      anchored[it->second] = true;
      anchor[i] = true;
    }
  }

  std::vector<std::size_t> occupancy(locations.size(), 1);
  std::vector<std::size_t> assigned(states.size(), 0);
  const std::span<const Weight> mass_view(masses);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (anchor[i]) {
      assigned[i] = slot_of.at(states[i]);
      continue;
    }
    const std::size_t k = draw(mass_view);
    if (k >= locations.size()) throw ContractViolation("combine_split: reallocation index out of range");
    assigned[i] = k;
    ++occupancy[k];
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::size_t k = assigned[i];
    states[i] = locations[k];
    weights[i] = masses[k] / static_cast<Weight>(occupancy[k]);
  }
}

/// Combine-split with a random reallocation rule.
std::vector<Particle> combine_split(std::span<const Particle> particles, Reallocation realloc, Rng& rng);

/// Number of distinct occupied (positive-weight, transient) locations.
std::size_t occupied_locations(std::span<const Particle> particles);

/// Tracks which regions have ever held a particle during a run. Regions that
/// have never been occupied cannot go extinct; their quota is lent to the
/// occupied regions until they are first reached.
struct RegionSeeding {
  std::vector<bool> seeded;
};

/// Targets after lending the quota of empty, never-seeded regions to the
/// others (largest remainder, proportional to their own targets).
std::vector<std::size_t> effective_targets(std::span<const std::size_t> targets, std::span<const std::size_t> counts,
                                           const RegionSeeding* seeding);

/// Regional resampling: region l ends with exactly its (effective) target
/// count, drawn within the region by `inner`; the region's total weight is
/// preserved. Absorbed particles belong to no region. With `seeding` unset
/// every region counts as seeded. Throws RegionExtinct for a seeded empty
/// region.
std::vector<Particle> regional(std::span<const Particle> particles, const Partition& partition, const Model& model,
                               std::span<const std::size_t> targets, const ResamplerSpec& inner, Rng& rng,
                               RegionSeeding* seeding = nullptr);

struct ResampleContext {
  const Model* model = nullptr;
  const Partition* partition = nullptr;
  RegionSeeding* seeding = nullptr;
};

/// Dispatches on spec.kind. The result is not normalized.
std::vector<Particle> resample(const ResamplerSpec& spec, std::span<const Particle> particles,
                               const ResampleContext& context, Rng& rng);

}  // namespace qsd
