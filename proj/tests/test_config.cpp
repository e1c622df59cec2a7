#include <doctest.h>

#include <string>

#include <json.hpp>

#include "qsd/config.hpp"
#include "qsd/errors.hpp"

using namespace qsd;
using nlohmann::json;

namespace {
json base() {
  return json::parse(R"json({
    "schema": "qsd-experiment/1",
    "model": {"type": "pure_death", "rates": [3, 2, 3, 1, 3]},
    "initial": {"state": 5},
    "regions": [[[1, 2]], [[3, 5]]],
    "schedule": {"mode": "deterministic", "t_end": 40, "t_step": 1, "burn_in": 20, "sample_delay": 2},
    "resampler": {"kind": "regional", "targets": [50, 50], "inner": {"kind": "combine_split", "realloc": "uniform"}},
    "particles": 100,
    "seed": 2024,
    "replications": 3
  })json");
}

std::string error_of(const json& j) {
  try {
    parse_config(j.dump());
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}
}  // namespace

TEST_CASE("a regional pure death config parses") {
  const auto c = parse_config(base().dump());
  CHECK(std::get<PureDeath>(c.model).rates == std::vector<double>{3, 2, 3, 1, 3});
  CHECK(c.initial == InitialDistribution::point_mass(5));
  REQUIRE(c.regions.has_value());
  CHECK(c.regions->size() == 2);
  CHECK(c.resampler.kind == ResamplerKind::Regional);
  CHECK(c.resampler.targets == std::vector<std::size_t>{50, 50});
  CHECK(c.resampler.inner->kind == ResamplerKind::CombineSplit);
  CHECK(c.schedule.t_end == 40);
  CHECK(std::get<Deterministic>(c.schedule.mode).t_step == 1);
  CHECK(c.seed == 2024);
  CHECK(c.replications == 3);
}

TEST_CASE("serialization round-trips") {
  auto j = base();
  j["sweep"] = {{"parameter", "lambda"}, {"values", {0.1, 0.2}}, {"estimate", "mean"}};
  j["schedule"] = {{"mode", "dynamic"}, {"t_end", 30}, {"trigger_fraction", 0.2}, {"t_max", "inf"},
                   {"burn_in", 5}, {"sample_delay", 1}};
  j["output_dir"] = "somewhere";
  j["compare"] = {{"threshold", 0.05}};
  const auto c = parse_config(j.dump());
  CHECK(parse_config(serialize_config(c)) == c);

  const auto ti = json::parse(R"json({
    "model": {"type": "transient_immunity", "beta": 0.5, "gamma": 1, "delta": 0.6},
    "initial": {"states": ["(1,0)", [2, 1]], "weights": [3, 1]},
    "regions": [[[0, 0]], [[1, null]]],
    "schedule": {"mode": "dynamic", "t_end": 10, "trigger_fraction": 0.2, "t_max": 5},
    "resampler": {"kind": "regional", "targets": [50, 50], "inner": {"kind": "refill", "inner": {"kind": "residual"}}},
    "particles": 100
  })json");
  const auto c2 = parse_config(ti.dump());
  CHECK(c2.initial.states == std::vector<StateCode>{encode({1, 0}), encode({2, 1})});
  CHECK(parse_config(serialize_config(c2)) == c2);

  for (const char* model : {R"json({"type": "linear_birth_death", "beta": 0.4, "gamma": 1})json",
                            R"json({"type": "two_state_death", "delta": 0.4})json"}) {
    auto k = base();
    k["model"] = json::parse(model);
    k["initial"] = {{"state", 1}};
    k.erase("regions");
    k["resampler"] = {{"kind", "refill"}, {"inner", {{"kind", "multinomial"}}}};
    const auto ck = parse_config(k.dump());
    CHECK(parse_config(serialize_config(ck)) == ck);
  }
}

TEST_CASE("field errors name the offending field") {
  auto j = base();
  j["replications"] = 0;
  CHECK(error_of(j).find("/replications") != std::string::npos);

  j = base();
  j["schedule"]["t_step"] = -1;
  CHECK(error_of(j).find("t_step") != std::string::npos);

  j = base();
  j["schedule"].erase("t_end");
  CHECK(error_of(j).find("/schedule/t_end") != std::string::npos);

  j = base();
  j["resampler"]["targets"] = {50, 40};
  CHECK_FALSE(error_of(j).empty());

  j = base();
  j["model"]["type"] = "bogus";
  CHECK(error_of(j).find("/model") != std::string::npos);

  j = base();
  j["initial"]["state"] = 9;
  CHECK_FALSE(error_of(j).empty());

  j = base();
  j["schema"] = "other/2";
  CHECK(error_of(j).find("/schema") != std::string::npos);

  j = base();
  j["schedule"] = {{"mode", "dynamic"}, {"t_end", 30}, {"trigger_fraction", 0.2}, {"t_max", 5}};
  j["sweep"] = {{"parameter", "lambda"}, {"values", json::array()}};
  CHECK(error_of(j).find("/sweep/values") != std::string::npos);
}

TEST_CASE("syntax errors carry a position") {
  try {
    parse_config("{\n  \"model\": {\n    \"type\": ,\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("setup mirrors the config") {
  const auto c = parse_config(base().dump());
  const auto s = c.setup();
  CHECK(s.particles == 100);
  CHECK(s.schedule == c.schedule);
  CHECK(s.partition == c.regions);
  CHECK_NOTHROW(s.validate());
}
