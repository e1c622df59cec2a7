#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qsd/rng.hpp"

namespace qsd {

/// Packed model state. Code 0 is always the absorbing state.
using StateCode = std::uint64_t;

inline constexpr StateCode kAbsorbed = 0;

enum class TimeKind { Continuous, Discrete };

/// Pure death on {0..L}: i -> i-1 at rate rates[i-1].
struct PureDeath {
  std::vector<double> rates;
  friend bool operator==(const PureDeath&, const PureDeath&) = default;
};

/// Linear birth-death on N_0: births at beta*i, deaths at gamma*i.
struct LinearBirthDeath {
  double beta = 0.0;
  double gamma = 0.0;
  friend bool operator==(const LinearBirthDeath&, const LinearBirthDeath&) = default;
};

/// Two-type Wright-Fisher with selection; the state is the type-1 count.
struct WrightFisher {
  std::uint64_t population = 0;
  std::pair<double, double> selection{0.0, 0.0};
  friend bool operator==(const WrightFisher&, const WrightFisher&) = default;
};

/// (I, R) process: infection at beta*I, recovery at gamma*I, immunity loss at delta*R.
struct TransientImmunity {
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  friend bool operator==(const TransientImmunity&, const TransientImmunity&) = default;
};

/// Pure death on {0,1,2}: 2 -> 1 at rate delta, 1 -> 0 at rate 1.
struct TwoStateDeath {
  double delta = 0.0;
  friend bool operator==(const TwoStateDeath&, const TwoStateDeath&) = default;
};

using ModelSpec = std::variant<PureDeath, LinearBirthDeath, WrightFisher, TransientImmunity, TwoStateDeath>;

/// Infective/recovered pair of the transient immunity process.
struct ImmunityState {
  std::uint64_t infected = 0;
  std::uint64_t recovered = 0;
  friend bool operator==(const ImmunityState&, const ImmunityState&) = default;
};

/// Largest counter value representable in one half of a packed code.
inline constexpr std::uint64_t kCounterLimit = 0xFFFFFFFFULL;

StateCode encode(ImmunityState s);
ImmunityState decode_immunity(StateCode code) noexcept;

struct EventStep {
  double holding_time = 0.0;
  StateCode next_state = kAbsorbed;
};

struct Transition {
  double rate = 0.0;
  StateCode target = kAbsorbed;
};

/// An absorbing Markov process. Immutable once constructed.
class Model {
 public:
  /// Throws ContractViolation on invalid parameters.
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const noexcept { return spec_; }
  TimeKind time_kind() const noexcept;
  std::string name() const;

  /// Non-fatal parameter issues (e.g. no LCD because gamma <= beta).
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  bool is_absorbed(StateCode state) const noexcept;

  /// One Gillespie step (continuous time) or one generation (Wright-Fisher).
  /// Absorbing successors are reported as kAbsorbed.
  EventStep next_event(StateCode state, Rng& rng) const;

  /// Successor drawn from the jump chain only, for callers that manage
  /// holding times themselves. Continuous-time models only.
  StateCode jump(StateCode state, Rng& rng) const;

  /// Total exit rate of a transient state (continuous time).
  double exit_rate(StateCode state) const;

  /// Rate (or, for Wright-Fisher, one-step probability) of moving to 0.
  double absorption_rate(StateCode state) const;

  /// Outgoing transitions with rates. Continuous-time models only.
  std::vector<Transition> transitions(StateCode state) const;

  /// Scalar summary of a state: the state itself for one-dimensional models,
  /// the infective count for transient immunity.
  std::uint64_t coordinate(StateCode state) const noexcept;

  /// Human-readable state, e.g. "4" or "(2,3)".
  std::string describe(StateCode state) const;

  /// Parses the output of describe() back into a code; nullopt if malformed.
  std::optional<StateCode> parse_state(const std::string& text) const;

  /// True when `state` is a valid transient state of this model.
  bool is_valid_transient(StateCode state) const noexcept;

 private:
  ModelSpec spec_;
  std::vector<std::string> warnings_;
};

/// Initial law over transient states (a point mass or a weighted list).
struct InitialDistribution {
  std::vector<StateCode> states;
  std::vector<double> weights;

  static InitialDistribution point_mass(StateCode state) { return {{state}, {1.0}}; }

  /// Throws ContractViolation unless every state is a valid transient state
  /// of `model` and the weights are non-negative with a positive sum.
  void validate(const Model& model) const;
  StateCode draw(Rng& rng) const;

  friend bool operator==(const InitialDistribution&, const InitialDistribution&) = default;
};

}  // namespace qsd
