#include <doctest.h>

#include <cmath>
#include <vector>

#include "qsd/analysis.hpp"
#include "qsd/errors.hpp"
#include "qsd/oracle.hpp"

using namespace qsd;

namespace {
const std::vector<double> kRates{3, 2, 3, 1, 3};
const std::vector<double> kFive{1.0 / 3, 1.0 / 3, 1.0 / 9, 2.0 / 9, 0.0};

void check_five(const Distribution& u, double tol) {
  for (StateCode s = 1; s <= 5; ++s) {
    const double got = u.count(s) ? u.at(s) : 0.0;
    CHECK(got == doctest::Approx(kFive[s - 1]).epsilon(tol).scale(1));
  }
}
}  // namespace

TEST_CASE("support bound") {
  CHECK(support_bound(kRates, 5) == 4);
  CHECK(support_bound(kRates, 3) == 2);
  CHECK(support_bound(kRates, 1) == 1);
  const std::vector<double> c{2, 2, 2};
  CHECK(support_bound(c, 3) == 3);
}

TEST_CASE("pure death recursion") {
  const auto r = pure_death_lcd(kRates, 5);
  check_five(r.u, 1e-12);
  CHECK(r.alpha == doctest::Approx(1.0));
  CHECK(eigen_residual(Model(PureDeath{kRates}), r) < 1e-12);

  const std::vector<double> one{2.5};
  const auto single = pure_death_lcd(one, 1);
  CHECK(single.u.at(1) == 1.0);
  CHECK(single.alpha == 2.5);
}

TEST_CASE("constant rates give a point mass at 1") {
  const std::vector<double> c{2, 2, 2};
  const auto r = pure_death_lcd(c, 3);
  CHECK(r.u.at(1) == doctest::Approx(1.0));
  CHECK(r.alpha == doctest::Approx(2.0));
  // Tied rates: the conditional law reaches the point mass only like 1/t.
  const auto uni = lcd_uniformization(Model(PureDeath{c}), InitialDistribution::point_mass(3), {1e-6});
  CHECK(tv_distance(r.u, uni.u) < 1e-5);
}

TEST_CASE("uniformization agrees with the recursion") {
  const auto u = lcd_uniformization(Model(PureDeath{kRates}), InitialDistribution::point_mass(5), {1e-12});
  check_five(u.u, 1e-8);
  CHECK(u.alpha == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("two-state death") {
  const auto r = lcd_uniformization(Model(TwoStateDeath{0.5}), InitialDistribution::point_mass(2), {1e-12});
  CHECK(r.u.at(1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.u.at(2) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("linear birth-death is geometric") {
  const double beta = 0.4, gamma = 1.0;
  UniformizationOptions opts;
  opts.tol = 1e-10;
  opts.truncation = 200;
  const auto r = lcd_uniformization(Model(LinearBirthDeath{beta, gamma}), InitialDistribution::point_mass(1), opts);
  Distribution geo;
  double rest = 1.0;
  for (StateCode k = 1; k < 200; ++k) {
    geo[k] = (1 - beta / gamma) * std::pow(beta / gamma, double(k - 1));
    rest -= geo[k];
  }
  geo[200] = rest;
  CHECK(tv_distance(r.u, geo) <= 1e-6);
  CHECK(r.alpha == doctest::Approx(gamma - beta).epsilon(1e-4));
}

TEST_CASE("uniformization refuses oversized state spaces") {
  UniformizationOptions opts;
  opts.max_states = 10;
  CHECK_THROWS_AS(
      lcd_uniformization(Model(TransientImmunity{0.5, 1.0, 0.6}), InitialDistribution::point_mass(encode({1, 0})), opts),
      UnsupportedOracle);
}

TEST_CASE("wright-fisher power iteration") {
  const auto d2 = wf_lcd_power_iteration(2, {0.0, 0.0});
  CHECK(d2.u.size() == 1);
  CHECK(d2.u.at(1) == doctest::Approx(1.0));

  const auto sym = wf_lcd_power_iteration(4, {0.0, 0.0});
  CHECK(sym.u.at(1) == doctest::Approx(sym.u.at(3)).epsilon(1e-10));

  const auto r = wf_lcd_power_iteration(20, {0.0, 0.1});
  CHECK(eigen_residual(Model(WrightFisher{20, {0.0, 0.1}}), r) <= 1e-10);
  double sum = 0;
  for (auto [s, p] : r.u) sum += p;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(r.alpha > 0.0);
  CHECK(r.alpha < 1.0);

  CHECK_THROWS(wf_lcd_power_iteration(500, {0.0, 0.0}));
}

TEST_CASE("two-state chain step") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(two_state_chain_step(1.0, 6, 6, 0.4, rng) == 1.0);

  const std::uint64_t n1 = 6, n2 = 4;
  const double delta = 0.5;
  const int n = 100000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) {
    const double x = two_state_chain_step(0.0, n1, n2, delta, rng);
    if (x == 0.0) {
      ++zeros;
    } else {
      CHECK(x == doctest::Approx(1.0 / n2));
    }
  }
  const double p = n1 / (n1 + delta * n2);
  CHECK(std::abs(zeros / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("two-state chain long-run mean") {
  Rng rng(2);
  double x = 0.5, sum = 0.0;
  const int steps = 1000000;
  for (int i = 0; i < steps; ++i) {
    x = two_state_chain_step(x, 20, 20, 0.4, rng);
    sum += x;
  }
  CHECK(std::abs(sum / steps - 0.4) <= 0.05);
}

TEST_CASE("drift check runs in exact arithmetic") {
  for (auto [n1, n2] : {std::pair<std::uint64_t, std::uint64_t>{6, 6}, {20, 20}}) {
    const auto v = lyapunov_drift_check(LyapunovParams::from(n1, n2, 0.4));
    CHECK(v.points == 99);
    // With these constants the bound is attained with equality everywhere.
    CHECK(v.nonstrict_holds == 99);
    CHECK(v.strict_holds == 0);
    CHECK(v.min_margin == 0.0);
    CHECK_FALSE(v.pass);
  }
  CHECK_THROWS_AS(LyapunovParams::from(6, 3, 0.5), RegimeError);
  CHECK_THROWS_AS(LyapunovParams::from(1, 6, 0.5), RegimeError);
  CHECK_THROWS_AS(LyapunovParams::from(6, 6, 0.9), RegimeError);  // needs N_2 >= 10
}

TEST_CASE("transient immunity decay parameter") {
  CHECK(ti_alpha(0.3, 1.0, 0.5) == doctest::Approx(0.5));
  CHECK(ti_alpha(0.7, 1.0, 0.5) == doctest::Approx(0.3));
  CHECK(ti_alpha(0.5, 1.0, 0.5) == doctest::Approx(0.5));
  CHECK_THROWS_AS(ti_alpha(1.0, 1.0, 0.5), RegimeError);
}

TEST_CASE("random pure death chains: recursion matches uniformization") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    std::vector<double> rates(n);
    for (auto& r : rates) r = 0.1 + 4.9 * rng.uniform();
    const auto rec = pure_death_lcd(rates, n);
    const auto uni = lcd_uniformization(Model(PureDeath{rates}), InitialDistribution::point_mass(n), {1e-11});
    CHECK(tv_distance(rec.u, uni.u) < 1e-6);
    CHECK(rec.alpha == doctest::Approx(uni.alpha).epsilon(1e-5));
  }
}
