#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsd/ensemble.hpp"
#include "qsd/models.hpp"
#include "qsd/rng.hpp"

namespace qsd {

struct OracleResult {
  Distribution u;  // over transient states, sums to 1
  double alpha = 0.0;
  std::string method;
};

struct UniformizationOptions {
  double tol = 1e-8;                // TV between the t and 2t marginals
  std::uint64_t truncation = 200;   // cap on Model::coordinate for countable spaces
  std::size_t max_states = 10000;
  double initial_time = 1.0;
  int max_doublings = 24;
};

/// Conditional law of X(t) given survival, X(0) ~ initial, by uniformization;
/// t doubles until successive marginals agree. Continuous-time models only.
/// Throws UnsupportedOracle when the reachable set exceeds max_states and
/// NoConvergence when the doubling budget runs out.
OracleResult lcd_uniformization(const Model& model, const InitialDistribution& initial,
                                const UniformizationOptions& options = {});

/// Largest j <= start whose rate is no larger than every earlier rate.
std::uint64_t support_bound(std::span<const double> rates, std::uint64_t start);

/// Left-eigenvector recursion for the pure death process started at `start`.
/// The result covers states 1..start (zeros beyond the support bound).
OracleResult pure_death_lcd(std::span<const double> rates, std::uint64_t start);

/// Dominant left eigenvector of the Wright-Fisher kernel on counts 1..D-1;
/// alpha = 1 - rho. Requires D <= 200.
OracleResult wf_lcd_power_iteration(std::uint64_t population, std::pair<double, double> selection,
                                    double tol = 1e-13, std::size_t max_iterations = 1000000);

/// ||u^T Q + alpha u^T||_inf over transient states (continuous time), or
/// ||u^T P_S - (1 - alpha) u^T||_inf for Wright-Fisher.
double eigen_residual(const Model& model, const OracleResult& result);

/// One step of the two-state weight chain under per-event combine-split.
double two_state_chain_step(double x, std::uint64_t n1, std::uint64_t n2, double delta, Rng& rng);

struct LyapunovParams {
  double drift_rate = 0.0;    // lambda
  double drift_offset = 0.0;  // K
  std::uint64_t n1 = 0;
  std::uint64_t n2 = 0;
  double delta = 0.0;

  /// Throws RegimeError unless 0 < delta < 1, N_1 >= 2 and N_2 >= max(5, 1/(1-delta)).
  static LyapunovParams from(std::uint64_t n1, std::uint64_t n2, double delta);
};

struct LyapunovVerdict {
  std::size_t points = 0;
  std::size_t strict_holds = 0;     // PV(x) <  lambda V(x) + K
  std::size_t nonstrict_holds = 0;  // PV(x) <= lambda V(x) + K
  double min_margin = 0.0;          // min over x of lambda V(x) + K - PV(x)
  bool pass = false;                // strict inequality at every point
};

/// Evaluates PV(x) for V(x) = x / (1 - x) in exact rational arithmetic
/// (delta is taken as the exact value of its binary representation).
LyapunovVerdict lyapunov_drift_check(const LyapunovParams& params, std::span<const double> grid);

/// The 99-point grid {0.01, ..., 0.99}, evaluated exactly as k/100.
LyapunovVerdict lyapunov_drift_check(const LyapunovParams& params);

/// min(delta, gamma - beta); RegimeError when gamma <= beta.
double ti_alpha(double beta, double gamma, double delta);

}  // namespace qsd
