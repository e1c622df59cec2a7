#include "qsd/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qsd {

bool operator==(const ResamplerSpec& a, const ResamplerSpec& b) {
  if (a.kind != b.kind || a.targets != b.targets) return false;
  if (a.kind == ResamplerKind::CombineSplit && a.realloc != b.realloc) return false;
  if (static_cast<bool>(a.inner) != static_cast<bool>(b.inner)) return false;
  return !a.inner || *a.inner == *b.inner;
}

void validate(const ResamplerSpec& spec, std::size_t particle_count, std::size_t region_count, bool dynamic) {
  if (particle_count == 0) throw ConfigError("particle count must be positive");
  if (dynamic && spec.kind != ResamplerKind::Regional) {
    throw ConfigError("dynamic schedules require a regional resampler");
  }
  switch (spec.kind) {
    case ResamplerKind::None:
    case ResamplerKind::Multinomial:
    case ResamplerKind::Residual:
    case ResamplerKind::CombineSplit:
      return;
    case ResamplerKind::Refill:
      if (!spec.inner || (spec.inner->kind != ResamplerKind::Multinomial && spec.inner->kind != ResamplerKind::Residual)) {
        throw ConfigError("refill needs a multinomial or residual inner resampler");
      }
      return;
    case ResamplerKind::Regional: {
      if (region_count == 0) throw ConfigError("regional resampling needs a region partition");
      if (spec.targets.size() != region_count) throw ConfigError("one target per region is required");
      if (std::accumulate(spec.targets.begin(), spec.targets.end(), std::size_t{0}) != particle_count) {
        throw ConfigError("regional targets must sum to the particle count");
      }
      for (std::size_t n : spec.targets) {
        if (n == 0) throw ConfigError("regional targets must be positive");
        if (dynamic && n < 2) throw ConfigError("dynamic schedules need every regional target >= 2");
      }
      if (!spec.inner) throw ConfigError("regional resampling needs an inner resampler");
      const auto inner = spec.inner->kind;
      if (inner == ResamplerKind::Regional || inner == ResamplerKind::None) {
        throw ConfigError("regional inner resampler must be multinomial, residual, refill or combine_split");
      }
      if (inner == ResamplerKind::Refill) validate(*spec.inner, particle_count, 0, false);
      return;
    }
  }
}

std::vector<std::size_t> multinomial_indices(std::span<const double> weights, std::size_t count, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw AllAbsorbed();
  std::vector<std::size_t> out;
  out.reserve(count);
  if (count == 0) return out;

  // Sorted uniforms from normalized exponential spacings, then one CDF sweep.
  std::vector<double> spacing(count + 1);
  double acc = 0.0;
  for (auto& s : spacing) {
    acc += rng.exponential(1.0);
    s = acc;
  }
  const double scale = total / acc;
  std::size_t i = 0;
  double cumulative = weights[0];
  for (std::size_t k = 0; k < count; ++k) {
    const double u = spacing[k] * scale;
    while ((u >= cumulative || weights[i] <= 0.0) && i + 1 < weights.size()) {
      ++i;
      cumulative += weights[i];
    }
    // Guard against rounding placing u past the last positive weight.
    std::size_t pick = i;
    while (weights[pick] <= 0.0 && pick > 0) --pick;
    out.push_back(pick);
  }
  return out;
}

std::vector<std::size_t> residual_indices(std::span<const double> weights, std::size_t count, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw AllAbsorbed();
  const auto n = static_cast<double>(count);
  std::vector<std::size_t> copies(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double expected = n * weights[i] / total;
    const double whole = std::floor(expected);
    copies[i] = static_cast<std::size_t>(whole);
    remainder[i] = expected - whole;
    assigned += copies[i];
  }
  // Rounding can overshoot by a copy; take it back from the largest holder.
  while (assigned > count) {
    auto it = std::max_element(copies.begin(), copies.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < copies.size(); ++i) out.insert(out.end(), copies[i], i);
  if (assigned < count) {
    const bool any_remainder = std::any_of(remainder.begin(), remainder.end(), [](double r) { return r > 0.0; });
    const auto extra =
        multinomial_indices(any_remainder ? std::span<const double>(remainder) : weights, count - assigned, rng);
    out.insert(out.end(), extra.begin(), extra.end());
    std::sort(out.begin(), out.end());
  }
  return out;
}

namespace {

std::vector<double> weights_of(std::span<const Particle> particles) {
  std::vector<double> w(particles.size());
  std::transform(particles.begin(), particles.end(), w.begin(), [](const Particle& p) { return p.weight; });
  return w;
}

std::vector<Particle> copies_with_uniform_weight(std::span<const Particle> particles,
                                                 const std::vector<std::size_t>& picks, double weight) {
  std::vector<Particle> out;
  out.reserve(picks.size());
  for (std::size_t i : picks) out.push_back({particles[i].state, weight, kUnscheduled});
  return out;
}

std::vector<std::size_t> select(ResamplerKind kind, std::span<const double> weights, std::size_t count, Rng& rng) {
  switch (kind) {
    case ResamplerKind::Multinomial:
      return multinomial_indices(weights, count, rng);
    case ResamplerKind::Residual:
      return residual_indices(weights, count, rng);
    default:
      throw ContractViolation("index selection needs a multinomial or residual scheme");
  }
}

/// Reallocation draw over combined location masses.
class LocationDraw {
 public:
  LocationDraw(Reallocation realloc, Rng& rng) : realloc_(realloc), rng_(rng) {}

  std::size_t operator()(std::span<const double> masses) {
    if (realloc_ == Reallocation::UniformOverLocations) return rng_.below(masses.size());
    if (cumulative_.empty()) {
      cumulative_.resize(masses.size());
      std::partial_sum(masses.begin(), masses.end(), cumulative_.begin());
    }
    const double u = rng_.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), masses.size() - 1);
  }

 private:
  Reallocation realloc_;
  Rng& rng_;
  std::vector<double> cumulative_;
};

std::vector<Particle> combine_split_arrays(std::vector<StateCode> states, std::vector<double> weights,
                                           Reallocation realloc, Rng& rng) {
  combine_split_core(std::span<StateCode>(states), std::span<double>(weights), LocationDraw(realloc, rng));
  std::vector<Particle> out(states.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {states[i], weights[i], kUnscheduled};
  return out;
}

}  // namespace

std::vector<Particle> multinomial(std::span<const Particle> particles, std::size_t count, Rng& rng) {
  const auto w = weights_of(particles);
  const auto picks = multinomial_indices(w, count, rng);
  return copies_with_uniform_weight(particles, picks, total_weight(particles) / static_cast<double>(count));
}

std::vector<Particle> residual(std::span<const Particle> particles, std::size_t count, Rng& rng) {
  const auto w = weights_of(particles);
  const auto picks = residual_indices(w, count, rng);
  return copies_with_uniform_weight(particles, picks, total_weight(particles) / static_cast<double>(count));
}

std::vector<Particle> refill(std::span<const Particle> particles, ResamplerKind inner, Rng& rng) {
  std::vector<std::size_t> survivors;
  std::vector<double> survivor_weights;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (particles[i].state != kAbsorbed) {
      survivors.push_back(i);
      survivor_weights.push_back(particles[i].weight);
    }
  }
  if (survivors.empty()) throw AllAbsorbed();
  std::vector<Particle> out(particles.begin(), particles.end());
  const std::size_t absorbed = particles.size() - survivors.size();
  if (absorbed == 0) return out;

  const double mean_weight = std::accumulate(survivor_weights.begin(), survivor_weights.end(), 0.0) /
                             static_cast<double>(survivors.size());
  const auto donors = select(inner, survivor_weights, absorbed, rng);
  std::size_t next = 0;
  for (auto& p : out) {
    if (p.state != kAbsorbed) continue;
    p = {particles[survivors[donors[next++]]].state, mean_weight, kUnscheduled};
  }
  return out;
}

std::vector<Particle> combine_split(std::span<const Particle> particles, Reallocation realloc, Rng& rng) {
  std::vector<StateCode> states(particles.size());
  std::vector<double> weights(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    states[i] = particles[i].state;
    weights[i] = particles[i].weight;
  }
  return combine_split_arrays(std::move(states), std::move(weights), realloc, rng);
}

std::size_t occupied_locations(std::span<const Particle> particles) {
  std::vector<StateCode> seen;
  for (const auto& p : particles) {
    if (p.state != kAbsorbed && p.weight > 0.0) seen.push_back(p.state);
  }
  std::sort(seen.begin(), seen.end());
  return static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
}

std::vector<std::size_t> effective_targets(std::span<const std::size_t> targets, std::span<const std::size_t> counts,
                                           const RegionSeeding* seeding) {
  std::vector<std::size_t> out(targets.begin(), targets.end());
  std::size_t freed = 0;
  std::size_t receiving = 0;
  for (std::size_t l = 0; l < targets.size(); ++l) {
    const bool seeded = seeding == nullptr || seeding->seeded[l];
    if (counts[l] == 0 && !seeded) {
      freed += out[l];
      out[l] = 0;
    } else {
      receiving += targets[l];
    }
  }
  if (freed == 0) return out;
  if (receiving == 0) throw AllAbsorbed();

  // Largest remainder; ties go to the lower region index.
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t handed = 0;
  for (std::size_t l = 0; l < targets.size(); ++l) {
    if (out[l] == 0) continue;
    const double share = static_cast<double>(freed) * static_cast<double>(targets[l]) / static_cast<double>(receiving);
    const auto whole = static_cast<std::size_t>(std::floor(share));
    out[l] += whole;
    handed += whole;
    remainders.emplace_back(share - static_cast<double>(whole), l);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; handed < freed; ++k, ++handed) ++out[remainders[k % remainders.size()].second];
  return out;
}

namespace {

std::vector<Particle> resample_within_region(std::span<const Particle> members, std::size_t target,
                                             const ResamplerSpec& inner, Rng& rng) {
  const double region_weight = total_weight(members);
  switch (inner.kind) {
    case ResamplerKind::Multinomial:
      return multinomial(members, target, rng);
    case ResamplerKind::Residual:
      return residual(members, target, rng);
    case ResamplerKind::Refill: {
      if (target < members.size()) return multinomial(members, target, rng);
      std::vector<Particle> out(members.begin(), members.end());
      const std::size_t extra = target - members.size();
      if (extra == 0) return out;
      const auto w = weights_of(members);
      const auto donors = select(inner.inner->kind, w, extra, rng);
      const double mean_weight = region_weight / static_cast<double>(members.size());
      for (std::size_t d : donors) out.push_back({members[d].state, mean_weight, kUnscheduled});
      const double scale = region_weight / total_weight(out);
      for (auto& p : out) p.weight *= scale;
      return out;
    }
    case ResamplerKind::CombineSplit: {
      if (target < occupied_locations(members)) return multinomial(members, target, rng);
      std::vector<StateCode> states;
      std::vector<double> weights;
      if (target >= members.size()) {
        for (const auto& p : members) {
          states.push_back(p.state);
          weights.push_back(p.weight);
        }
      } else {
        // Pre-combine so that only `target` slots remain: one per location.
        std::unordered_map<StateCode, std::size_t> slot;
        for (const auto& p : members) {
          if (p.weight <= 0.0) continue;
          auto [it, inserted] = slot.try_emplace(p.state, states.size());
          if (inserted) {
            states.push_back(p.state);
            weights.push_back(p.weight);
          } else {
            weights[it->second] += p.weight;
          }
        }
      }
      states.resize(target, kAbsorbed);
      weights.resize(target, 0.0);
      return combine_split_arrays(std::move(states), std::move(weights), inner.realloc, rng);
    }
    default:
      throw ContractViolation("unsupported inner resampler for regional resampling");
  }
}

}  // namespace

std::vector<Particle> regional(std::span<const Particle> particles, const Partition& partition, const Model& model,
                               std::span<const std::size_t> targets, const ResamplerSpec& inner, Rng& rng,
                               RegionSeeding* seeding) {
  if (targets.size() != partition.size()) throw ContractViolation("regional: one target per region required");
  std::vector<std::vector<Particle>> members(partition.size());
  for (const auto& p : particles) {
    if (p.state == kAbsorbed) continue;
    const auto l = partition.region_of(p.state, model);
    if (!l) throw ContractViolation("state " + model.describe(p.state) + " lies outside every region");
    members[*l].push_back(p);
  }
  std::vector<std::size_t> counts(partition.size());
  for (std::size_t l = 0; l < counts.size(); ++l) counts[l] = members[l].size();

  if (seeding != nullptr) {
    seeding->seeded.resize(partition.size(), false);
    for (std::size_t l = 0; l < counts.size(); ++l) {
      if (counts[l] > 0) seeding->seeded[l] = true;
    }
  }
  for (std::size_t l = 0; l < counts.size(); ++l) {
    const bool seeded = seeding == nullptr || seeding->seeded[l];
    if (counts[l] == 0 && seeded && targets[l] > 0) throw RegionExtinct(l);
  }
  const auto quota = effective_targets(targets, counts, seeding);

  std::vector<Particle> out;
  out.reserve(particles.size());
  for (std::size_t l = 0; l < members.size(); ++l) {
    if (quota[l] == 0) continue;
    auto part = resample_within_region(members[l], quota[l], inner, rng);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<Particle> resample(const ResamplerSpec& spec, std::span<const Particle> particles,
                               const ResampleContext& context, Rng& rng) {
  switch (spec.kind) {
    case ResamplerKind::None:
      return {particles.begin(), particles.end()};
    case ResamplerKind::Multinomial:
      return multinomial(particles, particles.size(), rng);
    case ResamplerKind::Residual:
      return residual(particles, particles.size(), rng);
    case ResamplerKind::Refill:
      return refill(particles, spec.inner->kind, rng);
    case ResamplerKind::CombineSplit:
      return combine_split(particles, spec.realloc, rng);
    case ResamplerKind::Regional:
      if (context.model == nullptr || context.partition == nullptr) {
        throw ContractViolation("regional resampling needs a model and a partition");
      }
      return regional(particles, *context.partition, *context.model, spec.targets, *spec.inner, rng, context.seeding);
  }
  throw ContractViolation("unknown resampler kind");
}

}  // namespace qsd
