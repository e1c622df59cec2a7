#include <doctest.h>

#include <vector>

#include "qsd/analysis.hpp"
#include "qsd/errors.hpp"

using namespace qsd;

namespace {
const Model kDeath(PureDeath{{3, 2, 3, 1, 3}});
}

TEST_CASE("decay estimate") {
  const Distribution five{{1, 1.0 / 3}, {2, 1.0 / 3}, {3, 1.0 / 9}, {4, 2.0 / 9}};
  CHECK(decay_estimate(five, kDeath) == doctest::Approx(1.0));

  const std::vector<Particle> quiet{{3, 1.0}};
  CHECK(decay_estimate(quiet, kDeath) == 0.0);

  const Model ti(TransientImmunity{0.3, 1.0, 0.5});
  const SampleRecord record{2.0, {{encode({0, 1}), 1.0}}};
  CHECK(decay_estimate(record, ti) == doctest::Approx(0.5));
}

TEST_CASE("decay estimate is linear in the weights") {
  const std::vector<Particle> a{{1, 0.2}, {2, 0.8}};
  const std::vector<Particle> b{{1, 0.7}, {5, 0.3}};
  std::vector<Particle> mix;
  for (const auto& p : a) mix.push_back({p.state, 0.25 * p.weight});
  for (const auto& p : b) mix.push_back({p.state, 0.75 * p.weight});
  CHECK(decay_estimate(mix, kDeath) ==
        doctest::Approx(0.25 * decay_estimate(a, kDeath) + 0.75 * decay_estimate(b, kDeath)));
}

TEST_CASE("alpha trace") {
  RunLog log;
  log.samples.push_back({1.0, {{1, 1.0}}});
  log.samples.push_back({2.0, {{3, 1.0}}});
  const auto t = alpha_trace(log, kDeath);
  CHECK(t.times == std::vector<double>{1.0, 2.0});
  CHECK(t.estimates == std::vector<double>{3.0, 0.0});
  CHECK(t.pooled == doctest::Approx(1.5));
  CHECK_THROWS_AS(alpha_trace(RunLog{}, kDeath), EmptyLog);
}

TEST_CASE("total variation") {
  const Distribution p{{1, 0.5}, {2, 0.5}};
  const Distribution q{{1, 1.0}};
  const Distribution r{{7, 1.0}};
  CHECK(tv_distance(p, p) == 0.0);
  CHECK(tv_distance(q, r) == doctest::Approx(1.0));
  CHECK(tv_distance(p, q) == doctest::Approx(0.5));
  CHECK_THROWS_AS(tv_distance(Distribution{{1, 0.9}}, q), ContractViolation);
}

TEST_CASE("total variation is a metric on random distributions") {
  Rng rng(3);
  auto random_dist = [&] {
    Distribution d;
    double sum = 0;
    for (StateCode s = 1; s <= 6; ++s) {
      if (rng.bernoulli(0.3)) continue;
      d[s] = rng.uniform() + 1e-3;
      sum += d[s];
    }
    if (d.empty()) return Distribution{{1, 1.0}};
    for (auto& [s, w] : d) w /= sum;
    return d;
  };
  for (int i = 0; i < 200; ++i) {
    const auto a = random_dist(), b = random_dist(), c = random_dist();
    const double ab = tv_distance(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
    CHECK(ab == doctest::Approx(tv_distance(b, a)));
    CHECK(ab <= tv_distance(a, c) + tv_distance(c, b) + 1e-12);
  }
}

TEST_CASE("cumulative mean trace") {
  RunLog single;
  single.samples.push_back({4.0, {{3, 1.0}}});
  const auto t = cumulative_mean_trace(single, kDeath);
  REQUIRE(t.size() == 1);
  CHECK(t[0].time == 4.0);
  CHECK(t[0].value == 3.0);

  RunLog log;
  log.samples.push_back({1.0, {{1, 0.5}, {3, 0.5}}});
  log.samples.push_back({2.0, {{4, 1.0}}});
  const auto c = cumulative_mean_trace(log, kDeath);
  CHECK(c[0].value == doctest::Approx(2.0));
  CHECK(c[1].value == doctest::Approx(3.0));
  const auto sq = cumulative_mean_trace(log, kDeath, [](StateCode s) { return double(s * s); });
  CHECK(sq[0].value == doctest::Approx(5.0));
  CHECK(max_occupied_coordinate(log, kDeath) == 4);
  CHECK_THROWS_AS(cumulative_mean_trace(RunLog{}, kDeath), EmptyLog);
}

TEST_CASE("birth-death mean trace approaches the geometric mean") {
  RunSetup s{Model(LinearBirthDeath{0.4, 1.0}), {60.0, Deterministic{0.5}, 20.0, 0.5},
             ResamplerSpec::combine_split(), 500, InitialDistribution::point_mass(1), std::nullopt};
  Rng rng(5);
  const auto log = run(s, rng);
  REQUIRE(log.ok());
  const auto trace = cumulative_mean_trace(log, s.model);
  CHECK(trace.back().value == doctest::Approx(5.0 / 3).epsilon(0.1));
}
