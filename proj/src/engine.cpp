#include "qsd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "qsd/errors.hpp"

namespace qsd {

namespace {

bool integral(double x) { return std::isfinite(x) && std::floor(x) == x; }

double time_epsilon(const Schedule& s) { return 1e-9 * std::max(1.0, s.t_end); }

SampleRecord snapshot(std::span<const Particle> particles, double time) {
  const double total = total_weight(particles);
  if (!(total > 0.0)) throw AllAbsorbed();
  SampleRecord record{time, {}};
  for (const auto& p : particles) {
    if (p.state != kAbsorbed && p.weight > 0.0) record.survivors.push_back({p.state, p.weight / total});
  }
  return record;
}

void trace_regions(RunLog& log, std::span<const Particle> particles, const RunSetup& setup, double time) {
  if (!setup.partition) return;
  const auto summary = region_summary(particles, *setup.partition, setup.model);
  for (std::size_t l = 0; l < summary.counts.size(); ++l) {
    log.region_traces.push_back({time, l, summary.counts[l], summary.weights[l]});
  }
}

void record_failure(RunLog& log, const Error& err, double time) {
  RunFailure failure{err.kind(), err.what(), time, std::nullopt};
  if (const auto* extinct = dynamic_cast<const RegionExtinct*>(&err)) failure.region = extinct->region();
  log.failure = std::move(failure);
}

/// One resampling event at `time`: normalize, trace, resample, normalize.
void resample_now(Ensemble& e, const RunSetup& setup, const ResampleContext& context, RunLog& log, double time,
                  Rng& rng) {
  const std::size_t before = survivor_count(e.particles);
  normalize(e.particles);
  trace_regions(log, e.particles, setup, time);
  auto next = resample(setup.resampler, e.particles, context, rng);
  normalize(next);
  // Holding times are memoryless, so pending events are simply redrawn.
  for (auto& p : next) p.next_event_time = kUnscheduled;
  e.particles = std::move(next);
  e.clock = time;
  log.resample_times.push_back(time);
  log.survivor_trace.push_back({time, before, survivor_count(e.particles)});
}

}  // namespace

void Schedule::validate(TimeKind kind) const {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("schedule.t_end must be positive and finite");
  if (!(burn_in >= 0.0) || !(burn_in < t_end)) throw ConfigError("schedule.burn_in must satisfy 0 <= T_b < T_end");
  if (!(sample_delay > 0.0)) throw ConfigError("schedule.sample_delay must be positive");
  if (const auto* d = std::get_if<Deterministic>(&mode)) {
    if (!(d->t_step > 0.0) || !std::isfinite(d->t_step)) throw ConfigError("schedule.t_step must be positive");
  } else {
    const auto& dyn = std::get<Dynamic>(mode);
    if (!(dyn.trigger_fraction >= 0.0) || !(dyn.trigger_fraction < 1.0)) {
      throw ConfigError("schedule.trigger_fraction must lie in [0, 1)");
    }
    if (!(dyn.t_max > 0.0)) throw ConfigError("schedule.t_max must be positive");
  }
  if (kind == TimeKind::Discrete) {
    bool ok = integral(t_end) && integral(burn_in) && integral(sample_delay);
    if (const auto* d = std::get_if<Deterministic>(&mode)) ok = ok && integral(d->t_step);
    if (const auto* dyn = std::get_if<Dynamic>(&mode); dyn && std::isfinite(dyn->t_max)) ok = ok && integral(dyn->t_max);
    if (!ok) throw ConfigError("discrete-time models need integer schedule times (generations)");
  }
}

void RunSetup::validate() const {
  schedule.validate(model.time_kind());
  if (particles == 0) throw ConfigError("particles must be positive");
  initial.validate(model);
  const std::size_t regions = partition ? partition->size() : 0;
  if (resampler.kind == ResamplerKind::Regional && !partition) {
    throw ConfigError("regional resampling needs a region partition");
  }
  qsd::validate(resampler, particles, regions, schedule.is_dynamic());
}

Ensemble initialize(const Model& model, const InitialDistribution& initial, std::size_t count, Rng& rng) {
  Ensemble e;
  e.particles.reserve(count);
  const double w = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) e.particles.push_back({initial.draw(rng), w, kUnscheduled});
  (void)model;
  return e;
}

void advance_to(Ensemble& ensemble, const Model& model, double t, Rng& rng) {
  if (t < ensemble.clock) throw ContractViolation("advance_to: target time precedes the ensemble clock");
  if (model.time_kind() == TimeKind::Discrete) {
    const auto generations = std::llround(t) - std::llround(ensemble.clock);
    for (auto& p : ensemble.particles) {
      for (long long g = 0; g < generations && p.state != kAbsorbed; ++g) {
        p.state = model.next_event(p.state, rng).next_state;
      }
      if (p.state == kAbsorbed) p.weight = 0.0;
    }
    ensemble.clock = t;
    return;
  }
  for (auto& p : ensemble.particles) {
    if (p.state == kAbsorbed) {
      p.weight = 0.0;
      continue;
    }
    if (p.next_event_time < 0.0) p.next_event_time = ensemble.clock + rng.exponential(model.exit_rate(p.state));
    while (p.next_event_time <= t) {
      p.state = model.jump(p.state, rng);
      if (model.is_absorbed(p.state)) {
        p = {kAbsorbed, 0.0, kUnscheduled};
        break;
      }
      p.next_event_time += rng.exponential(model.exit_rate(p.state));
    }
  }
  ensemble.clock = t;
}

namespace {

// Regions holding particles at t = 0 count as seeded from the start.
RegionSeeding initial_seeding(const Ensemble& e, const RunSetup& setup) {
  RegionSeeding seeding;
  if (!setup.partition) return seeding;
  for (std::size_t n : region_summary(e.particles, *setup.partition, setup.model).counts) {
    seeding.seeded.push_back(n > 0);
  }
  return seeding;
}

}  // namespace

RunLog run_deterministic(const RunSetup& setup, Rng& rng) {
  const auto& sched = setup.schedule;
  const double step = std::get<Deterministic>(sched.mode).t_step;
  const double eps = time_epsilon(sched);
  RunLog log;
  Ensemble e = initialize(setup.model, setup.initial, setup.particles, rng);
  RegionSeeding seeding = initial_seeding(e, setup);
  const ResampleContext context{&setup.model, setup.partition ? &*setup.partition : nullptr, &seeding};
  std::optional<double> last_sample;

  for (std::size_t k = 1;; ++k) {
    double t = static_cast<double>(k) * step;
    if (t > sched.t_end - eps) t = sched.t_end;
    try {
      advance_to(e, setup.model, t, rng);
      resample_now(e, setup, context, log, t, rng);
      if (t >= sched.burn_in - eps && (!last_sample || t - *last_sample >= sched.sample_delay - eps)) {
        log.samples.push_back(snapshot(e.particles, t));
        last_sample = t;
      }
    } catch (const Error& err) {
      record_failure(log, err, t);
      break;
    }
    if (t >= sched.t_end) break;
  }
  return log;
}

namespace {

/// Per-region trigger levels; negative disables a region's count trigger.
std::vector<double> trigger_levels(const RunSetup& setup) {
  const double lambda = std::get<Dynamic>(setup.schedule.mode).trigger_fraction;
  std::vector<double> levels;
  for (std::size_t n : setup.resampler.targets) {
    levels.push_back(lambda > 0.0 ? std::max(lambda * static_cast<double>(n), 1.0) : -1.0);
  }
  return levels;
}

std::vector<std::size_t> region_counts(const Ensemble& e, const RunSetup& setup) {
  return region_summary(e.particles, *setup.partition, setup.model).counts;
}

bool any_triggered(const std::vector<std::size_t>& counts, const std::vector<double>& levels,
                   const RegionSeeding& seeding) {
  for (std::size_t l = 0; l < counts.size(); ++l) {
    const bool seeded = l < seeding.seeded.size() && seeding.seeded[l];
    if (seeded && static_cast<double>(counts[l]) <= levels[l]) return true;
  }
  return false;
}

RunLog run_dynamic_discrete(const RunSetup& setup, Rng& rng) {
  const auto& sched = setup.schedule;
  const auto& dyn = std::get<Dynamic>(sched.mode);
  const auto levels = trigger_levels(setup);
  RunLog log;
  Ensemble e = initialize(setup.model, setup.initial, setup.particles, rng);
  RegionSeeding seeding = initial_seeding(e, setup);
  const ResampleContext context{&setup.model, &*setup.partition, &seeding};
  double last_resample = 0.0;
  double next_sample = sched.burn_in;
  double t = 0.0;
  try {
    if (next_sample <= 0.0) {
      log.samples.push_back(snapshot(e.particles, 0.0));
      next_sample += sched.sample_delay;
    }
    while (t < sched.t_end) {
      t += 1.0;
      advance_to(e, setup.model, t, rng);
      const auto counts = region_counts(e, setup);
      if (any_triggered(counts, levels, seeding) || t - last_resample >= dyn.t_max) {
        resample_now(e, setup, context, log, t, rng);
        last_resample = t;
      }
      if (t >= next_sample) {
        log.samples.push_back(snapshot(e.particles, t));
        next_sample += sched.sample_delay;
      }
    }
  } catch (const Error& err) {
    record_failure(log, err, t);
  }
  return log;
}

}  // namespace

RunLog run_dynamic(const RunSetup& setup, Rng& rng) {
  if (!setup.partition || setup.resampler.kind != ResamplerKind::Regional) {
    throw ContractViolation("run_dynamic needs a regional resampler and a partition");
  }
  if (setup.model.time_kind() == TimeKind::Discrete) return run_dynamic_discrete(setup, rng);

  const auto& sched = setup.schedule;
  const auto& dyn = std::get<Dynamic>(sched.mode);
  const double eps = time_epsilon(sched);
  const auto levels = trigger_levels(setup);
  const auto& model = setup.model;
  const auto& partition = *setup.partition;

  RunLog log;
  Ensemble e = initialize(model, setup.initial, setup.particles, rng);
  RegionSeeding seeding = initial_seeding(e, setup);
  const ResampleContext context{&model, &partition, &seeding};
  std::vector<std::size_t> counts;

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> events;
  auto schedule_all = [&] {
    events = {};
    for (std::size_t i = 0; i < e.particles.size(); ++i) {
      auto& p = e.particles[i];
      if (p.state == kAbsorbed) continue;
      p.next_event_time = e.clock + rng.exponential(model.exit_rate(p.state));
      events.emplace(p.next_event_time, i);
    }
    counts = region_counts(e, setup);
  };

  double next_forced = dyn.t_max;
  std::size_t sample_index = 0;
  auto sample_time = [&] { return sched.burn_in + static_cast<double>(sample_index) * sched.sample_delay; };

  try {
    schedule_all();
    while (true) {
      const double barrier = std::min({next_forced, sample_time(), sched.t_end});
      bool triggered = false;
      while (!events.empty() && events.top().first <= barrier) {
        const auto [time, i] = events.top();
        events.pop();
        auto& p = e.particles[i];
        const auto from = partition.region_of(p.state, model);
        p.state = model.jump(p.state, rng);
        std::optional<std::size_t> to;
        if (model.is_absorbed(p.state)) {
          p = {kAbsorbed, 0.0, kUnscheduled};
        } else {
          to = partition.region_of(p.state, model);
          p.next_event_time = time + rng.exponential(model.exit_rate(p.state));
          events.emplace(p.next_event_time, i);
        }
        if (from != to) {
          if (from) --counts[*from];
          if (to) ++counts[*to];
          if (from && any_triggered(counts, levels, seeding)) {
            e.clock = time;
            triggered = true;
            break;
          }
        }
      }
      if (triggered) {
        resample_now(e, setup, context, log, e.clock, rng);
        schedule_all();
        next_forced = e.clock + dyn.t_max;
        continue;
      }
      e.clock = barrier;
      if (barrier >= next_forced) {
        resample_now(e, setup, context, log, barrier, rng);
        schedule_all();
        next_forced = barrier + dyn.t_max;
      }
      if (barrier >= sample_time() && barrier <= sched.t_end + eps) {
        log.samples.push_back(snapshot(e.particles, barrier));
        ++sample_index;
      }
      if (barrier >= sched.t_end) {
        // A grid point within rounding of T_end is still taken.
        if (sample_time() <= sched.t_end + eps) log.samples.push_back(snapshot(e.particles, sched.t_end));
        break;
      }
    }
  } catch (const Error& err) {
    record_failure(log, err, e.clock);
  }
  return log;
}

RunLog run(const RunSetup& setup, Rng& rng) {
  setup.validate();
  return setup.schedule.is_dynamic() ? run_dynamic(setup, rng) : run_deterministic(setup, rng);
}

Distribution collect_samples(const std::vector<RunLog>& logs) {
  std::size_t records = 0;
  for (const auto& log : logs) records += log.samples.size();
  if (records == 0) throw EmptyLog();
  const double share = 1.0 / static_cast<double>(records);
  Distribution pooled;
  for (const auto& log : logs) {
    for (const auto& record : log.samples) {
      for (const auto& s : record.survivors) pooled[s.state] += share * s.weight;
    }
  }
  return pooled;
}

Distribution collect_samples(const RunLog& log) {
  if (log.samples.empty()) throw EmptyLog();
  const double share = 1.0 / static_cast<double>(log.samples.size());
  Distribution pooled;
  for (const auto& record : log.samples) {
    for (const auto& s : record.survivors) pooled[s.state] += share * s.weight;
  }
  return pooled;
}

}  // namespace qsd
