#include "qsd/models.hpp"

#include <cmath>
#include <sstream>

#include "qsd/errors.hpp"

namespace qsd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ContractViolation(std::string(what) + " must be a positive finite rate");
  }
}

double wf_offspring_probability(const WrightFisher& wf, std::uint64_t count) {
  const auto x = static_cast<double>(count);
  const auto rest = static_cast<double>(wf.population - count);
  const double fit1 = x * (1.0 + wf.selection.first);
  return fit1 / (fit1 + rest * (1.0 + wf.selection.second));
}

[[noreturn]] void counter_overflow(ImmunityState s) {
  std::ostringstream os;
  os << "transient immunity counter overflow at (" << s.infected << "," << s.recovered << ")";
  throw Error(os.str());
}

}  // namespace

StateCode encode(ImmunityState s) {
  if (s.infected > kCounterLimit || s.recovered > kCounterLimit) counter_overflow(s);
  return (s.infected << 32) | s.recovered;
}

ImmunityState decode_immunity(StateCode code) noexcept {
  return {code >> 32, code & kCounterLimit};
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  std::visit(overloaded{
                 [](const PureDeath& m) {
                   if (m.rates.empty()) throw ContractViolation("pure death needs at least one rate");
                   for (double r : m.rates) require_positive(r, "death rate");
                 },
                 [this](const LinearBirthDeath& m) {
                   require_positive(m.beta, "beta");
                   require_positive(m.gamma, "gamma");
                   if (m.gamma <= m.beta) {
                     warnings_.emplace_back("gamma <= beta: the limiting conditional distribution does not exist");
                   }
                 },
                 [](const WrightFisher& m) {
                   if (m.population < 2) throw ContractViolation("Wright-Fisher population must be at least 2");
                   if (m.population > kCounterLimit) throw ContractViolation("Wright-Fisher population too large");
                   if (!(m.selection.first >= 0.0) || !(m.selection.second >= 0.0)) {
                     throw ContractViolation("selection coefficients must be non-negative");
                   }
                 },
                 [this](const TransientImmunity& m) {
                   require_positive(m.beta, "beta");
                   require_positive(m.gamma, "gamma");
                   require_positive(m.delta, "delta");
                   if (m.gamma <= m.beta) {
                     warnings_.emplace_back("gamma <= beta: the limiting conditional distribution does not exist");
                   }
                 },
                 [](const TwoStateDeath& m) { require_positive(m.delta, "delta"); },
             },
             spec_);
}

TimeKind Model::time_kind() const noexcept {
  return std::holds_alternative<WrightFisher>(spec_) ? TimeKind::Discrete : TimeKind::Continuous;
}

std::string Model::name() const {
  return std::visit(overloaded{
                        [](const PureDeath&) { return std::string("pure_death"); },
                        [](const LinearBirthDeath&) { return std::string("linear_birth_death"); },
                        [](const WrightFisher&) { return std::string("wright_fisher"); },
                        [](const TransientImmunity&) { return std::string("transient_immunity"); },
                        [](const TwoStateDeath&) { return std::string("two_state_death"); },
                    },
                    spec_);
}

bool Model::is_absorbed(StateCode state) const noexcept {
  if (state == kAbsorbed) return true;
  if (const auto* wf = std::get_if<WrightFisher>(&spec_)) return state >= wf->population;
  return false;
}

bool Model::is_valid_transient(StateCode state) const noexcept {
  if (is_absorbed(state)) return false;
  return std::visit(overloaded{
                        [state](const PureDeath& m) { return state <= m.rates.size(); },
                        [](const LinearBirthDeath&) { return true; },
                        [](const WrightFisher&) { return true; },
                        [](const TransientImmunity&) { return true; },
                        [state](const TwoStateDeath&) { return state <= 2; },
                    },
                    spec_);
}

double Model::exit_rate(StateCode state) const {
  if (is_absorbed(state)) throw ContractViolation("exit_rate of an absorbed state");
  return std::visit(overloaded{
                        [state](const PureDeath& m) { return m.rates.at(state - 1); },
                        [state](const LinearBirthDeath& m) { return (m.beta + m.gamma) * static_cast<double>(state); },
                        [](const WrightFisher&) -> double {
                          throw ContractViolation("Wright-Fisher is a discrete-time model");
                        },
                        [state](const TransientImmunity& m) {
                          const auto s = decode_immunity(state);
                          return (m.beta + m.gamma) * static_cast<double>(s.infected) +
                                 m.delta * static_cast<double>(s.recovered);
                        },
                        [state](const TwoStateDeath& m) { return state == 2 ? m.delta : 1.0; },
                    },
                    spec_);
}

StateCode Model::jump(StateCode state, Rng& rng) const {
  if (is_absorbed(state)) throw ContractViolation("jump from an absorbed state");
  return std::visit(overloaded{
                        [state](const PureDeath&) -> StateCode { return state - 1; },
                        [state, &rng](const LinearBirthDeath& m) -> StateCode {
                          const double total = m.beta + m.gamma;
                          return rng.uniform() * total < m.beta ? state + 1 : state - 1;
                        },
                        [](const WrightFisher&) -> StateCode {
                          throw ContractViolation("Wright-Fisher is a discrete-time model");
                        },
                        [state, &rng](const TransientImmunity& m) -> StateCode {
                          auto s = decode_immunity(state);
                          const auto i = static_cast<double>(s.infected);
                          const double births = m.beta * i;
                          const double recoveries = m.gamma * i;
                          const double total = births + recoveries + m.delta * static_cast<double>(s.recovered);
                          const double u = rng.uniform() * total;
                          if (u < births) {
                            ++s.infected;
                          } else if (u < births + recoveries) {
                            --s.infected;
                            ++s.recovered;
                          } else {
                            --s.recovered;
                          }
                          return encode(s);
                        },
                        [state](const TwoStateDeath&) -> StateCode { return state - 1; },
                    },
                    spec_);
}

EventStep Model::next_event(StateCode state, Rng& rng) const {
  if (is_absorbed(state)) throw ContractViolation("next_event called on an absorbed state");
  if (const auto* wf = std::get_if<WrightFisher>(&spec_)) {
    const std::uint64_t next = rng.binomial(wf->population, wf_offspring_probability(*wf, state));
    return {1.0, next >= wf->population ? kAbsorbed : next};
  }
  const double holding = rng.exponential(exit_rate(state));
  return {holding, jump(state, rng)};
}

double Model::absorption_rate(StateCode state) const {
  if (is_absorbed(state)) throw ContractViolation("absorption_rate of an absorbed state");
  return std::visit(overloaded{
                        [state](const PureDeath& m) { return state == 1 ? m.rates[0] : 0.0; },
                        [state](const LinearBirthDeath& m) { return state == 1 ? m.gamma : 0.0; },
                        [state](const WrightFisher& m) {
                          const double p = wf_offspring_probability(m, state);
                          const auto d = static_cast<double>(m.population);
                          return std::pow(1.0 - p, d) + std::pow(p, d);
                        },
                        [state](const TransientImmunity& m) {
                          const auto s = decode_immunity(state);
                          return s.infected == 0 && s.recovered == 1 ? m.delta : 0.0;
                        },
                        [state](const TwoStateDeath&) { return state == 1 ? 1.0 : 0.0; },
                    },
                    spec_);
}

std::vector<Transition> Model::transitions(StateCode state) const {
  if (is_absorbed(state)) return {};
  return std::visit(overloaded{
                        [state](const PureDeath& m) -> std::vector<Transition> {
                          return {{m.rates.at(state - 1), state - 1}};
                        },
                        [state](const LinearBirthDeath& m) -> std::vector<Transition> {
                          const auto i = static_cast<double>(state);
                          return {{m.beta * i, state + 1}, {m.gamma * i, state - 1}};
                        },
                        [](const WrightFisher&) -> std::vector<Transition> {
                          throw ContractViolation("Wright-Fisher is a discrete-time model");
                        },
                        [state](const TransientImmunity& m) -> std::vector<Transition> {
                          const auto s = decode_immunity(state);
                          std::vector<Transition> out;
                          const auto i = static_cast<double>(s.infected);
                          if (s.infected > 0) {
                            out.push_back({m.beta * i, encode({s.infected + 1, s.recovered})});
                            out.push_back({m.gamma * i, encode({s.infected - 1, s.recovered + 1})});
                          }
                          if (s.recovered > 0) {
                            out.push_back({m.delta * static_cast<double>(s.recovered),
                                           encode({s.infected, s.recovered - 1})});
                          }
                          return out;
                        },
                        [state](const TwoStateDeath& m) -> std::vector<Transition> {
                          if (state == 2) return {{m.delta, 1}};
                          return {{1.0, kAbsorbed}};
                        },
                    },
                    spec_);
}

std::uint64_t Model::coordinate(StateCode state) const noexcept {
  if (std::holds_alternative<TransientImmunity>(spec_)) return decode_immunity(state).infected;
  return state;
}

std::string Model::describe(StateCode state) const {
  if (std::holds_alternative<TransientImmunity>(spec_)) {
    const auto s = decode_immunity(state);
    return "(" + std::to_string(s.infected) + "," + std::to_string(s.recovered) + ")";
  }
  return std::to_string(state);
}

std::optional<StateCode> Model::parse_state(const std::string& text) const {
  std::istringstream is(text);
  if (std::holds_alternative<TransientImmunity>(spec_)) {
    char open = 0;
    char comma = 0;
    char close = 0;
    std::uint64_t i = 0;
    std::uint64_t r = 0;
    if (!(is >> open >> i >> comma >> r >> close) || open != '(' || comma != ',' || close != ')') {
      return std::nullopt;
    }
    if (i > kCounterLimit || r > kCounterLimit) return std::nullopt;
    return encode({i, r});
  }
  std::uint64_t value = 0;
  if (!(is >> value)) return std::nullopt;
  return value;
}

void InitialDistribution::validate(const Model& model) const {
  if (states.empty() || states.size() != weights.size()) {
    throw ContractViolation("initial distribution needs matching, non-empty states and weights");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (!model.is_valid_transient(states[k])) {
      throw ContractViolation("initial state " + model.describe(states[k]) + " is not a transient state");
    }
    if (!(weights[k] >= 0.0) || !std::isfinite(weights[k])) {
      throw ContractViolation("initial weights must be non-negative");
    }
    total += weights[k];
  }
  if (!(total > 0.0)) throw ContractViolation("initial weights sum to zero");
}

StateCode InitialDistribution::draw(Rng& rng) const {
  if (states.size() == 1) return states.front();
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (u < weights[k]) return states[k];
    u -= weights[k];
  }
  return states.back();
}

}  // namespace qsd
