#include <doctest.h>

#include <cmath>
#include <vector>

#include "qsd/analysis.hpp"
#include "qsd/engine.hpp"
#include "qsd/errors.hpp"
#include "qsd/oracle.hpp"

using namespace qsd;

namespace {
RunSetup death_setup() {
  RunSetup s{Model(PureDeath{{3, 2, 3, 1, 3}}), {}, ResamplerSpec::multinomial(), 100,
             InitialDistribution::point_mass(5), std::nullopt};
  return s;
}
double total(const SampleRecord& r) {
  double w = 0;
  for (const auto& s : r.survivors) w += s.weight;
  return w;
}
}  // namespace

TEST_CASE("advance_to: a single exponential clock") {
  const Model m(PureDeath{{1.0}});
  Rng rng(1);
  const double t = 0.7;
  const int n = 100000;
  int absorbed = 0;
  for (int r = 0; r < n; ++r) {
    Ensemble e{{{1, 1.0}}, 0.0};
    advance_to(e, m, t, rng);
    if (e.particles[0].state == kAbsorbed) {
      ++absorbed;
      CHECK(e.particles[0].weight == 0.0);
    } else {
      CHECK(e.particles[0].weight == 1.0);
    }
  }
  const double p = 1 - std::exp(-t);
  CHECK(std::abs(absorbed / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("advance_to the current clock is the identity") {
  const Model m(PureDeath{{3, 2, 3, 1, 3}});
  Rng rng(2);
  Ensemble e = initialize(m, InitialDistribution::point_mass(4), 10, rng);
  const auto before = e.particles;
  advance_to(e, m, e.clock, rng);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(e.particles[i].state == before[i].state);
    CHECK(e.particles[i].weight == before[i].weight);
  }
}

TEST_CASE("initialize gives equal weights") {
  const Model m(TwoStateDeath{0.5});
  Rng rng(3);
  const auto e = initialize(m, InitialDistribution::point_mass(2), 8, rng);
  CHECK(e.size() == 8);
  for (const auto& p : e.particles) {
    CHECK(p.state == 2);
    CHECK(p.weight == 0.125);
  }
}

TEST_CASE("two-state death approaches (delta, 1 - delta)") {
  const double delta = 0.3;
  RunSetup s{Model(TwoStateDeath{delta}), {}, ResamplerSpec::refill(ResamplerSpec::multinomial()), 2000,
             InitialDistribution::point_mass(2), std::nullopt};
  s.schedule = {20.0, Deterministic{0.25}, 15.0, 0.5};
  Rng rng(4);
  const auto log = run(s, rng);
  REQUIRE(log.ok());
  const auto h = collect_samples(log);
  const auto oracle = lcd_uniformization(s.model, s.initial);
  CHECK(oracle.u.at(1) == doctest::Approx(delta).epsilon(1e-6));
  CHECK(tv_distance(h, oracle.u) < 0.03);
}

TEST_CASE("deterministic schedule resamples on the step grid") {
  auto s = death_setup();
  s.model = Model(PureDeath{{0.05, 0.05, 0.05, 0.05, 0.05}});
  s.schedule = {20.0, Deterministic{5.0}, 0.0, 5.0};
  s.resampler = ResamplerSpec::refill(ResamplerSpec::multinomial());
  Rng rng(5);
  const auto log = run(s, rng);
  REQUIRE(log.ok());
  CHECK(log.resample_times == std::vector<double>{5, 10, 15, 20});
  for (const auto& r : log.samples) CHECK(total(r) == doctest::Approx(1.0));

  s.schedule = {12.0, Deterministic{5.0}, 0.0, 5.0};
  Rng rng2(5);
  CHECK(run(s, rng2).resample_times == std::vector<double>{5, 10, 12});
}

TEST_CASE("samples respect burn-in and spacing") {
  auto s = death_setup();
  s.resampler = ResamplerSpec::refill(ResamplerSpec::multinomial());
  s.schedule = {10.0, Deterministic{1.0}, 4.0, 2.0};
  Rng rng(6);
  const auto log = run(s, rng);
  REQUIRE_MESSAGE(log.ok(), (log.failure ? log.failure->kind : ""));
  std::vector<double> times;
  for (const auto& r : log.samples) times.push_back(r.time);
  CHECK(times == std::vector<double>{4, 6, 8, 10});
}

TEST_CASE("wright-fisher with refill keeps the ensemble full") {
  RunSetup s{Model(WrightFisher{20, {0.0, 0.1}}), {20.0, Deterministic{5.0}, 0.0, 5.0},
             ResamplerSpec::refill(ResamplerSpec::multinomial()), 100, InitialDistribution::point_mass(10),
             std::nullopt};
  Rng rng(7);
  const auto log = run(s, rng);
  REQUIRE(log.ok());
  REQUIRE(log.survivor_trace.size() == 4);
  for (const auto& row : log.survivor_trace) CHECK(row.after == 100);

  s.resampler = ResamplerSpec::none();
  Rng rng2(7);
  const auto baseline = run(s, rng2);
  REQUIRE(baseline.ok());
  CHECK(baseline.survivor_trace.back().after < 100);
}

TEST_CASE("dynamic with lambda = 0 resamples every t_max") {
  RunSetup s{Model(LinearBirthDeath{0.4, 1.0}), {10.0, Dynamic{0.0, 3.0}, 0.0, 1.0},
             ResamplerSpec::regional({60, 40}, ResamplerSpec::combine_split()), 100,
             InitialDistribution::point_mass(1), Partition({{{1, 1}}, {{2, std::nullopt}}})};
  Rng rng(8);
  const auto log = run(s, rng);
  REQUIRE(log.ok());
  CHECK(log.resample_times == std::vector<double>{3, 6, 9});
  CHECK(log.samples.size() == 11);
}

TEST_CASE("dynamic triggers keep every seeded region alive") {
  RunSetup s{Model(LinearBirthDeath{0.4, 1.0}), {30.0, Dynamic{0.2, 5.0}, 5.0, 1.0},
             ResamplerSpec::regional({60, 40}, ResamplerSpec::combine_split()), 100,
             InitialDistribution::point_mass(1), Partition({{{1, 1}}, {{2, std::nullopt}}})};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto log = run(s, rng);
    CHECK_MESSAGE(log.ok(), seed, " ", (log.failure ? log.failure->kind + " " + log.failure->message : ""));
    for (std::size_t k = 1; k < log.resample_times.size(); ++k) {
      CHECK(log.resample_times[k] - log.resample_times[k - 1] <= 5.0 + 1e-9);
    }
  }
}

TEST_CASE("failures are recorded, not thrown") {
  RunSetup s{Model(PureDeath{{50.0}}), {10.0, Deterministic{5.0}, 0.0, 1.0},
             ResamplerSpec::refill(ResamplerSpec::multinomial()), 5, InitialDistribution::point_mass(1),
             std::nullopt};
  Rng rng(9);
  const auto log = run(s, rng);
  REQUIRE_FALSE(log.ok());
  CHECK(log.failure->kind == "AllAbsorbed");
}

TEST_CASE("invalid setups are rejected") {
  auto s = death_setup();
  s.schedule = {10.0, Deterministic{0.0}, 0.0, 1.0};
  Rng rng(1);
  CHECK_THROWS_AS(run(s, rng), ConfigError);
  s.schedule = {10.0, Deterministic{1.0}, 10.0, 1.0};
  CHECK_THROWS_AS(run(s, rng), ConfigError);
  s.schedule = {10.0, Dynamic{0.2, 1.0}, 0.0, 1.0};
  CHECK_THROWS_AS(run(s, rng), ConfigError);  // dynamic needs a regional resampler

  RunSetup wf{Model(WrightFisher{10, {0, 0}}), {10.5, Deterministic{1.0}, 0.0, 1.0}, ResamplerSpec::multinomial(),
              10, InitialDistribution::point_mass(5), std::nullopt};
  CHECK_THROWS_AS(run(wf, rng), ConfigError);
}

TEST_CASE("collect_samples pools sampling times equally") {
  RunLog one;
  one.samples.push_back({1.0, {{3, 1.0}}});
  const auto point = collect_samples(one);
  CHECK(point.size() == 1);
  CHECK(point.at(3) == 1.0);

  RunLog two;
  two.samples.push_back({1.0, {{1, 0.5}, {2, 0.5}}});
  two.samples.push_back({2.0, {{4, 1.0}}});
  const auto pooled = collect_samples(two);
  CHECK(pooled.at(1) == 0.25);
  CHECK(pooled.at(2) == 0.25);
  CHECK(pooled.at(4) == 0.5);

  CHECK_THROWS_AS(collect_samples(RunLog{}), EmptyLog);
  CHECK_THROWS_AS(collect_samples(std::vector<RunLog>{RunLog{}, RunLog{}}), EmptyLog);
  const auto both = collect_samples(std::vector<RunLog>{one, two});
  CHECK(both.at(3) == doctest::Approx(1.0 / 3));
}

TEST_CASE("runs are reproducible from the seed") {
  auto s = death_setup();
  s.resampler = ResamplerSpec::refill(ResamplerSpec::residual());
  s.schedule = {15.0, Deterministic{1.0}, 5.0, 1.0};
  Rng a(77), b(77);
  const auto la = run(s, a), lb = run(s, b);
  REQUIRE(la.samples.size() == lb.samples.size());
  CHECK(collect_samples(la) == collect_samples(lb));
}
