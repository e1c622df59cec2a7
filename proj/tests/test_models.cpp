#include <doctest.h>

#include <cmath>
#include <map>

#include "qsd/errors.hpp"
#include "qsd/models.hpp"
#include "qsd/rng.hpp"

using namespace qsd;

namespace {
const PureDeath kDeath{{3, 2, 3, 1, 3}};
}

TEST_CASE("rng streams are reproducible and replication seeds differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  CHECK(replication_seed(7, 0) != replication_seed(7, 1));
  CHECK(replication_seed(7, 3) == replication_seed(7, 3));

  Rng r(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += r.exponential(2.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));

  std::map<std::uint64_t, int> hist;
  for (int i = 0; i < 60000; ++i) ++hist[r.below(6)];
  CHECK(hist.size() == 6);
  for (auto [k, c] : hist) CHECK(std::abs(c - 10000) < 4 * std::sqrt(60000 * (1.0 / 6) * (5.0 / 6)));
}

TEST_CASE("binomial sampler mean and variance") {
  Rng r(5);
  for (auto [n, p] : {std::pair<std::uint64_t, double>{20, 0.3}, {500, 0.9}, {10000, 0.5}}) {
    const int reps = 20000;
    double s = 0, s2 = 0;
    for (int i = 0; i < reps; ++i) {
      const auto k = static_cast<double>(r.binomial(n, p));
      CHECK(k <= static_cast<double>(n));
      s += k;
      s2 += k * k;
    }
    const double mean = s / reps, var = s2 / reps - mean * mean;
    const double v = n * p * (1 - p);
    CHECK(std::abs(mean - n * p) < 5 * std::sqrt(v / reps));
    CHECK(var == doctest::Approx(v).epsilon(0.05));
  }
  CHECK(r.binomial(10, 0.0) == 0);
  CHECK(r.binomial(10, 1.0) == 10);
}

TEST_CASE("pure death moves one step down at the rate of its state") {
  const Model m(kDeath);
  Rng rng(11);
  double total = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto step = m.next_event(4, rng);
    REQUIRE(step.next_state == 3);
    total += step.holding_time;
  }
  // Exp(1): standard error 1/sqrt(n)
  CHECK(std::abs(total / n - 1.0) < 4.0 / std::sqrt(n));
  CHECK(m.next_event(1, rng).next_state == kAbsorbed);
}

TEST_CASE("two-state death: state 1 is absorbed at rate 1") {
  const Model m(TwoStateDeath{0.4});
  Rng rng(3);
  CHECK(m.next_event(1, rng).next_state == kAbsorbed);
  CHECK(m.exit_rate(1) == 1.0);
  CHECK(m.exit_rate(2) == doctest::Approx(0.4));
  CHECK(m.jump(2, rng) == 1);
}

TEST_CASE("transient immunity competing exponentials") {
  const Model m(TransientImmunity{0.5, 1.0, 0.6});
  const StateCode s = encode({2, 3});
  CHECK(m.exit_rate(s) == doctest::Approx(4.8));

  Rng rng(17);
  std::map<StateCode, int> hist;
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hist[m.jump(s, rng)];
  const std::map<StateCode, double> want{
      {encode({3, 3}), 1.0 / 4.8}, {encode({1, 4}), 2.0 / 4.8}, {encode({2, 2}), 1.8 / 4.8}};
  CHECK(hist.size() == 3);
  for (auto [state, p] : want) {
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(hist[state] / double(n) - p) < 4 * se);
  }

  const auto tr = m.transitions(s);
  double rate = 0;
  for (const auto& t : tr) rate += t.rate;
  CHECK(rate == doctest::Approx(4.8));
}

TEST_CASE("immunity codes round-trip and reject overflow") {
  for (ImmunityState s : {ImmunityState{0, 0}, ImmunityState{1, 0}, ImmunityState{7, 123456},
                          ImmunityState{kCounterLimit, kCounterLimit}}) {
    CHECK(decode_immunity(encode(s)) == s);
  }
  CHECK_THROWS_AS(encode({kCounterLimit + 1, 0}), Error);
  const Model m(TransientImmunity{0.5, 1.0, 0.6});
  CHECK(m.describe(encode({2, 3})) == "(2,3)");
  CHECK(m.parse_state("(2,3)") == encode({2, 3}));
  CHECK_FALSE(m.parse_state("(2,").has_value());
}

TEST_CASE("absorption") {
  CHECK(Model(kDeath).is_absorbed(0));
  CHECK_FALSE(Model(kDeath).is_absorbed(3));
  const Model wf(WrightFisher{20, {0.0, 0.1}});
  CHECK(wf.is_absorbed(20));
  CHECK(wf.is_absorbed(0));
  CHECK_FALSE(wf.is_absorbed(7));
  const Model ti(TransientImmunity{0.5, 1.0, 0.5});
  CHECK_FALSE(ti.is_absorbed(encode({0, 3})));
  CHECK(ti.is_absorbed(encode({0, 0})));
}

TEST_CASE("absorption rates") {
  const Model m(kDeath);
  CHECK(m.absorption_rate(1) == 3.0);
  CHECK(m.absorption_rate(3) == 0.0);
  const Model ti(TransientImmunity{0.3, 1.0, 0.5});
  CHECK(ti.absorption_rate(encode({0, 1})) == 0.5);
  CHECK(ti.absorption_rate(encode({0, 2})) == 0.0);
  CHECK(ti.absorption_rate(encode({1, 0})) == 0.0);
}

TEST_CASE("wright-fisher generation is binomial with selection") {
  const std::uint64_t D = 20;
  const Model m(WrightFisher{D, {0.0, 0.1}});
  CHECK(m.time_kind() == TimeKind::Discrete);
  Rng rng(9);
  const int n = 50000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const auto step = m.next_event(10, rng);
    CHECK(step.holding_time == 1.0);
    sum += static_cast<double>(step.next_state == kAbsorbed ? 0 : step.next_state);
  }
  // x = 1/2, fitness (1, 1.1): p = 0.5 / (0.5 + 0.55)
  const double p = 0.5 / 1.05;
  const double se = std::sqrt(D * p * (1 - p) / n);
  CHECK(std::abs(sum / n - D * p) < 4 * se);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(Model(PureDeath{{}}), ContractViolation);
  CHECK_THROWS_AS(Model(PureDeath{{1.0, -2.0}}), ContractViolation);
  CHECK_THROWS_AS(Model(TwoStateDeath{0.0}), ContractViolation);
  CHECK_FALSE(Model(LinearBirthDeath{1.0, 0.5}).warnings().empty());
  CHECK(Model(LinearBirthDeath{0.4, 1.0}).warnings().empty());
}

TEST_CASE("initial distribution validation and draws") {
  const Model m(kDeath);
  CHECK_NOTHROW(InitialDistribution::point_mass(5).validate(m));
  CHECK_THROWS_AS(InitialDistribution::point_mass(6).validate(m), ContractViolation);
  CHECK_THROWS_AS(InitialDistribution::point_mass(0).validate(m), ContractViolation);
  const InitialDistribution mix{{1, 2}, {1.0, 3.0}};
  Rng rng(2);
  int twos = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) twos += mix.draw(rng) == 2;
  CHECK(std::abs(twos / double(n) - 0.75) < 4 * std::sqrt(0.75 * 0.25 / n));
}
