#include "qsd/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qsd/errors.hpp"

namespace qsd {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing required field");
  return *it;
}

const json* optional_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  }
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double number(const json& obj, const std::string& path, const char* key) {
  return number(field(obj, path, key), path + "/" + key);
}

std::uint64_t count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return j.get<std::uint64_t>();
  fail(path, "expected a non-negative integer");
}

std::uint64_t count(const json& obj, const std::string& path, const char* key) {
  return count(field(obj, path, key), path + "/" + key);
}

std::string text(const json& obj, const std::string& path, const char* key) {
  const auto& j = field(obj, path, key);
  if (!j.is_string()) fail(path + "/" + key, "expected a string");
  return j.get<std::string>();
}

json number_out(double x) {
  if (std::isinf(x)) return "inf";
  return x;
}

ModelSpec parse_model(const json& j) {
  const std::string path = "/model";
  const auto type = text(j, path, "type");
  if (type == "pure_death") {
    const auto& rates = field(j, path, "rates");
    if (!rates.is_array()) fail(path + "/rates", "expected an array");
    PureDeath m;
    for (std::size_t k = 0; k < rates.size(); ++k) m.rates.push_back(number(rates[k], path + "/rates/" + std::to_string(k)));
    return m;
  }
  if (type == "linear_birth_death") return LinearBirthDeath{number(j, path, "beta"), number(j, path, "gamma")};
  if (type == "wright_fisher") {
    const auto& sel = field(j, path, "selection");
    if (!sel.is_array() || sel.size() != 2) fail(path + "/selection", "expected two selection coefficients");
    return WrightFisher{count(j, path, "population"),
                        {number(sel[0], path + "/selection/0"), number(sel[1], path + "/selection/1")}};
  }
  if (type == "transient_immunity") {
    return TransientImmunity{number(j, path, "beta"), number(j, path, "gamma"), number(j, path, "delta")};
  }
  if (type == "two_state_death") return TwoStateDeath{number(j, path, "delta")};
  fail(path + "/type", "unknown model type '" + type + "'");
}

json model_json(const ModelSpec& spec) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PureDeath>) {
          return {{"type", "pure_death"}, {"rates", m.rates}};
        } else if constexpr (std::is_same_v<T, LinearBirthDeath>) {
          return {{"type", "linear_birth_death"}, {"beta", m.beta}, {"gamma", m.gamma}};
        } else if constexpr (std::is_same_v<T, WrightFisher>) {
          return {{"type", "wright_fisher"},
                  {"population", m.population},
                  {"selection", {m.selection.first, m.selection.second}}};
        } else if constexpr (std::is_same_v<T, TransientImmunity>) {
          return {{"type", "transient_immunity"}, {"beta", m.beta}, {"gamma", m.gamma}, {"delta", m.delta}};
        } else {
          return {{"type", "two_state_death"}, {"delta", m.delta}};
        }
      },
      spec);
}

StateCode parse_state_value(const json& j, const Model& model, const std::string& path) {
  if (j.is_string()) {
    if (auto code = model.parse_state(j.get<std::string>())) return *code;
    fail(path, "cannot parse state '" + j.get<std::string>() + "'");
  }
  if (j.is_array() && j.size() == 2) {
    return encode({count(j[0], path + "/0"), count(j[1], path + "/1")});
  }
  return count(j, path);
}

json state_json(StateCode s, const Model& model) {
  if (std::holds_alternative<TransientImmunity>(model.spec())) return model.describe(s);
  return s;
}

InitialDistribution parse_initial(const json& j, const Model& model) {
  const std::string path = "/initial";
  if (!j.is_object()) fail(path, "expected an object");
  if (const auto* s = optional_field(j, "state")) {
    return InitialDistribution::point_mass(parse_state_value(*s, model, path + "/state"));
  }
  const auto& states = field(j, path, "states");
  const auto& weights = field(j, path, "weights");
  if (!states.is_array() || !weights.is_array() || states.size() != weights.size()) {
    fail(path, "states and weights must be arrays of equal length");
  }
  InitialDistribution init;
  for (std::size_t k = 0; k < states.size(); ++k) {
    init.states.push_back(parse_state_value(states[k], model, path + "/states/" + std::to_string(k)));
    init.weights.push_back(number(weights[k], path + "/weights/" + std::to_string(k)));
  }
  return init;
}

json initial_json(const InitialDistribution& init, const Model& model) {
  if (init.states.size() == 1 && init.weights[0] == 1.0) return {{"state", state_json(init.states[0], model)}};
  json states = json::array();
  for (StateCode s : init.states) states.push_back(state_json(s, model));
  return {{"states", states}, {"weights", init.weights}};
}

Partition parse_regions(const json& j) {
  const std::string path = "/regions";
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of regions");
  std::vector<std::vector<Interval>> regions;
  for (std::size_t l = 0; l < j.size(); ++l) {
    const std::string rp = path + "/" + std::to_string(l);
    if (!j[l].is_array() || j[l].empty()) fail(rp, "a region is a non-empty array of [lo, hi] intervals");
    std::vector<Interval> region;
    for (std::size_t k = 0; k < j[l].size(); ++k) {
      const std::string ip = rp + "/" + std::to_string(k);
      const auto& iv = j[l][k];
      if (!iv.is_array() || iv.size() != 2) fail(ip, "an interval is [lo, hi] with hi null for unbounded");
      Interval interval{count(iv[0], ip + "/0"), std::nullopt};
      if (!iv[1].is_null()) interval.hi = count(iv[1], ip + "/1");
      region.push_back(interval);
    }
    regions.push_back(std::move(region));
  }
  try {
    return Partition(std::move(regions));
  } catch (const ContractViolation& e) {
    fail(path, e.what());
  }
}

json regions_json(const Partition& p) {
  json out = json::array();
  for (const auto& region : p.regions()) {
    json r = json::array();
    for (const auto& iv : region) r.push_back({iv.lo, iv.hi ? json(*iv.hi) : json(nullptr)});
    out.push_back(r);
  }
  return out;
}

Schedule parse_schedule(const json& j) {
  const std::string path = "/schedule";
  Schedule s;
  s.t_end = number(j, path, "t_end");
  s.burn_in = optional_field(j, "burn_in") ? number(j, path, "burn_in") : 0.0;
  s.sample_delay = optional_field(j, "sample_delay") ? number(j, path, "sample_delay") : 1.0;
  const auto mode = text(j, path, "mode");
  if (mode == "deterministic") {
    s.mode = Deterministic{number(j, path, "t_step")};
  } else if (mode == "dynamic") {
    Dynamic d;
    d.trigger_fraction = number(j, path, "trigger_fraction");
    if (optional_field(j, "t_max")) d.t_max = number(j, path, "t_max");
    s.mode = d;
  } else {
    fail(path + "/mode", "expected 'deterministic' or 'dynamic'");
  }
  return s;
}

json schedule_json(const Schedule& s) {
  json out = {{"t_end", s.t_end}, {"burn_in", s.burn_in}, {"sample_delay", s.sample_delay}};
  if (const auto* d = std::get_if<Deterministic>(&s.mode)) {
    out["mode"] = "deterministic";
    out["t_step"] = d->t_step;
  } else {
    const auto& dyn = std::get<Dynamic>(s.mode);
    out["mode"] = "dynamic";
    out["trigger_fraction"] = dyn.trigger_fraction;
    out["t_max"] = number_out(dyn.t_max);
  }
  return out;
}

ResamplerSpec parse_resampler(const json& j, const std::string& path) {
  const auto kind = text(j, path, "kind");
  if (kind == "none") return ResamplerSpec::none();
  if (kind == "multinomial") return ResamplerSpec::multinomial();
  if (kind == "residual") return ResamplerSpec::residual();
  if (kind == "refill") {
    const auto* inner = optional_field(j, "inner");
    return ResamplerSpec::refill(inner ? parse_resampler(*inner, path + "/inner") : ResamplerSpec::multinomial());
  }
  if (kind == "combine_split") {
    auto realloc = Reallocation::UniformOverLocations;
    if (const auto* r = optional_field(j, "realloc")) {
      const auto name = r->is_string() ? r->get<std::string>() : std::string();
      if (name == "proportional") {
        realloc = Reallocation::ProportionalToWeight;
      } else if (name != "uniform") {
        fail(path + "/realloc", "expected 'uniform' or 'proportional'");
      }
    }
    return ResamplerSpec::combine_split(realloc);
  }
  if (kind == "regional") {
    const auto& targets = field(j, path, "targets");
    if (!targets.is_array()) fail(path + "/targets", "expected an array of counts");
    std::vector<std::size_t> n;
    for (std::size_t k = 0; k < targets.size(); ++k) n.push_back(count(targets[k], path + "/targets/" + std::to_string(k)));
    return ResamplerSpec::regional(std::move(n), parse_resampler(field(j, path, "inner"), path + "/inner"));
  }
  fail(path + "/kind", "unknown resampler kind '" + kind + "'");
}

json resampler_json(const ResamplerSpec& r) {
  switch (r.kind) {
    case ResamplerKind::None:
      return {{"kind", "none"}};
    case ResamplerKind::Multinomial:
      return {{"kind", "multinomial"}};
    case ResamplerKind::Residual:
      return {{"kind", "residual"}};
    case ResamplerKind::Refill:
      return {{"kind", "refill"}, {"inner", resampler_json(*r.inner)}};
    case ResamplerKind::CombineSplit:
      return {{"kind", "combine_split"},
              {"realloc", r.realloc == Reallocation::UniformOverLocations ? "uniform" : "proportional"}};
    case ResamplerKind::Regional:
      return {{"kind", "regional"}, {"targets", r.targets}, {"inner", resampler_json(*r.inner)}};
  }
  return {};
}

OracleOptions parse_oracle(const json& j) {
  OracleOptions o;
  if (const auto* t = optional_field(j, "target")) {
    if (!t->is_string() || (t->get<std::string>() != "lcd" && t->get<std::string>() != "alpha")) {
      fail("/oracle/target", "expected 'lcd' or 'alpha'");
    }
    o.target = t->get<std::string>();
  }
  if (optional_field(j, "truncation")) o.truncation = count(j, "/oracle", "truncation");
  if (optional_field(j, "tol")) o.tol = number(j, "/oracle", "tol");
  if (!(o.tol > 0.0)) fail("/oracle/tol", "must be positive");
  return o;
}

SweepSpec parse_sweep(const json& j) {
  const std::string path = "/sweep";
  SweepSpec s;
  s.parameter = text(j, path, "parameter");
  if (s.parameter != "lambda" && s.parameter != "t_max" && s.parameter != "beta") {
    fail(path + "/parameter", "expected 'lambda', 't_max' or 'beta'");
  }
  const auto& values = field(j, path, "values");
  if (!values.is_array() || values.empty()) fail(path + "/values", "sweep needs a non-empty list of values");
  for (std::size_t k = 0; k < values.size(); ++k) s.values.push_back(number(values[k], path + "/values/" + std::to_string(k)));
  if (const auto* e = optional_field(j, "estimate")) {
    if (!e->is_string() || (e->get<std::string>() != "alpha" && e->get<std::string>() != "mean")) {
      fail(path + "/estimate", "expected 'alpha' or 'mean'");
    }
    s.estimate = e->get<std::string>();
  }
  return s;
}

std::string position_of(const std::string& input, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < input.size(); ++i) {
    if (input[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    const Model m(model);
    if (replications == 0) fail("/replications", "must be at least 1");
    if (particles == 0) fail("/particles", "must be at least 1");
    try {
      initial.validate(m);
    } catch (const ContractViolation& e) {
      fail("/initial", e.what());
    }
    setup().validate();
    if (sweep) {
      if (sweep->values.empty()) fail("/sweep/values", "sweep needs a non-empty list of values");
      if ((sweep->parameter == "lambda" || sweep->parameter == "t_max") && !schedule.is_dynamic()) {
        fail("/sweep/parameter", "sweeping " + sweep->parameter + " needs a dynamic schedule");
      }
      if (sweep->parameter == "beta" && !std::holds_alternative<LinearBirthDeath>(model) &&
          !std::holds_alternative<TransientImmunity>(model)) {
        fail("/sweep/parameter", "sweeping beta needs a birth-death or transient immunity model");
      }
    }
    if (!(compare_threshold >= 0.0)) fail("/compare/threshold", "must be non-negative");
  } catch (const ConfigError&) {
    throw;
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

RunSetup ExperimentConfig::setup() const {
  return RunSetup{Model(model), schedule, resampler, particles, initial, regions};
}

ExperimentConfig parse_config(const std::string& input) {
  json j;
  try {
    j = json::parse(input);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON at " + position_of(input, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  if (!j.is_object()) fail("/", "expected a JSON object");
  if (const auto* schema = optional_field(j, "schema")) {
    if (!schema->is_string() || schema->get<std::string>() != kConfigSchema) {
      fail("/schema", std::string("unsupported schema; expected '") + kConfigSchema + "'");
    }
  }

  ExperimentConfig c;
  try {
    c.model = parse_model(field(j, "", "model"));
    const Model model(c.model);
    c.initial = parse_initial(field(j, "", "initial"), model);
  } catch (const ContractViolation& e) {
    fail("/model", e.what());
  }
  if (const auto* r = optional_field(j, "regions")) c.regions = parse_regions(*r);
  c.schedule = parse_schedule(field(j, "", "schedule"));
  c.resampler = parse_resampler(field(j, "", "resampler"), "/resampler");
  c.particles = count(j, "", "particles");
  if (optional_field(j, "seed")) c.seed = count(j, "", "seed");
  if (optional_field(j, "replications")) c.replications = count(j, "", "replications");
  if (const auto* out = optional_field(j, "output_dir")) {
    if (!out->is_string()) fail("/output_dir", "expected a string");
    c.output_dir = out->get<std::string>();
  }
  if (const auto* o = optional_field(j, "oracle")) c.oracle = parse_oracle(*o);
  if (const auto* s = optional_field(j, "sweep")) c.sweep = parse_sweep(*s);
  if (const auto* cmp = optional_field(j, "compare")) {
    if (optional_field(*cmp, "threshold")) c.compare_threshold = number(*cmp, "/compare", "threshold");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  const Model model(c.model);
  json j = {{"schema", kConfigSchema},
            {"model", model_json(c.model)},
            {"initial", initial_json(c.initial, model)},
            {"schedule", schedule_json(c.schedule)},
            {"resampler", resampler_json(c.resampler)},
            {"particles", c.particles},
            {"seed", c.seed},
            {"replications", c.replications},
            {"oracle", {{"target", c.oracle.target}, {"truncation", c.oracle.truncation}, {"tol", c.oracle.tol}}},
            {"compare", {{"threshold", c.compare_threshold}}}};
  if (c.regions) j["regions"] = regions_json(*c.regions);
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  if (c.sweep) {
    j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}, {"estimate", c.sweep->estimate}};
  }
  return j.dump(2);
}

}  // namespace qsd
