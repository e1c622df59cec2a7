#include "qsd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include <boost/multiprecision/cpp_int.hpp>

#include "qsd/errors.hpp"

namespace qsd {

namespace {

/// Transient states reachable from the initial support, with sparse rates.
struct Generator {
  std::vector<StateCode> states;
  std::vector<std::vector<std::pair<std::size_t, double>>> out;  // to other enumerated states
  std::vector<double> exit;                                      // total exit rate (incl. absorption)
};

Generator enumerate(const Model& model, const InitialDistribution& initial, const UniformizationOptions& options) {
  Generator g;
  std::unordered_map<StateCode, std::size_t> index;
  std::deque<StateCode> queue;
  auto visit = [&](StateCode s) -> std::size_t {
    auto [it, inserted] = index.try_emplace(s, g.states.size());
    if (inserted) {
      if (g.states.size() >= options.max_states) {
        throw UnsupportedOracle("reachable transient set exceeds " + std::to_string(options.max_states) + " states");
      }
      g.states.push_back(s);
      queue.push_back(s);
    }
    return it->second;
  };
  for (StateCode s : initial.states) visit(s);
  while (!queue.empty()) {
    const StateCode s = queue.front();
    queue.pop_front();
    const std::size_t i = index.at(s);
    std::vector<std::pair<std::size_t, double>> edges;
    double exit = 0.0;
    for (const auto& tr : model.transitions(s)) {
      exit += tr.rate;
      // Mass leaving past the cap is dropped, like absorption.
      if (model.is_absorbed(tr.target) || model.coordinate(tr.target) > options.truncation) continue;
      edges.emplace_back(visit(tr.target), tr.rate);
    }
    if (g.out.size() <= i) {
      g.out.resize(i + 1);
      g.exit.resize(i + 1);
    }
    g.out[i] = std::move(edges);
    g.exit[i] = exit;
  }
  return g;
}

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

void normalize_vector(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (!(total > 0.0)) throw NoConvergence("uniformization lost all mass to underflow");
  for (double& x : v) x /= total;
}

/// v <- v exp(Q dt) via the Poisson-weighted series of the uniformized chain.
void propagate(const Generator& g, double lambda, double dt, std::vector<double>& v) {
  const double mean = lambda * dt;
  std::vector<double> term = v;
  std::vector<double> next(v.size());
  std::vector<double> acc(v.size(), 0.0);
  double weight = std::exp(-mean);
  double cumulative = 0.0;
  for (std::size_t k = 0;; ++k) {
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += weight * term[i];
    cumulative += weight;
    if (1.0 - cumulative < 1e-17 || (k > mean && weight < 1e-300)) break;
    if (k > 10 * static_cast<std::size_t>(mean) + 200) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (term[i] == 0.0) continue;
      next[i] += term[i] * (1.0 - g.exit[i] / lambda);
      for (const auto& [j, rate] : g.out[i]) next[j] += term[i] * rate / lambda;
    }
    term.swap(next);
    weight *= mean / static_cast<double>(k + 1);
  }
  v.swap(acc);
}

}  // namespace

OracleResult lcd_uniformization(const Model& model, const InitialDistribution& initial,
                                const UniformizationOptions& options) {
  if (model.time_kind() != TimeKind::Continuous) {
    throw UnsupportedOracle("uniformization needs a continuous-time model");
  }
  initial.validate(model);
  const Generator g = enumerate(model, initial, options);
  const double lambda = *std::max_element(g.exit.begin(), g.exit.end());

  std::vector<double> v(g.states.size(), 0.0);
  {
    std::unordered_map<StateCode, std::size_t> index;
    for (std::size_t i = 0; i < g.states.size(); ++i) index[g.states[i]] = i;
    for (std::size_t k = 0; k < initial.states.size(); ++k) v[index.at(initial.states[k])] += initial.weights[k];
    normalize_vector(v);
  }

  // Chunks keep lambda * dt <= 10 so the Poisson weights never underflow.
  const double chunk = 10.0 / lambda;
  auto advance = [&](double span) {
    while (span > 0.0) {
      const double dt = std::min(span, chunk);
      propagate(g, lambda, dt, v);
      normalize_vector(v);
      span -= dt;
    }
  };

  double t = options.initial_time;
  advance(t);
  bool converged = false;
  for (int d = 0; d < options.max_doublings; ++d) {
    const auto previous = v;
    advance(t);
    t *= 2.0;
    if (tv(previous, v) < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("uniformization did not settle within the doubling budget");

  OracleResult result{{}, 0.0, "uniformization"};
  for (std::size_t i = 0; i < g.states.size(); ++i) {
    if (v[i] > 0.0) {
      result.u[g.states[i]] = v[i];
      result.alpha += v[i] * model.absorption_rate(g.states[i]);
    }
  }
  return result;
}

std::uint64_t support_bound(std::span<const double> rates, std::uint64_t start) {
  if (start == 0 || start > rates.size()) throw ContractViolation("support_bound: start state out of range");
  std::uint64_t bound = 1;
  double prefix_min = rates[0];
  for (std::uint64_t j = 1; j <= start; ++j) {
    if (rates[j - 1] <= prefix_min) {
      prefix_min = rates[j - 1];
      bound = j;
    }
  }
  return bound;
}

OracleResult pure_death_lcd(std::span<const double> rates, std::uint64_t start) {
  const Model model(PureDeath{{rates.begin(), rates.end()}});  // validates the rates
  const std::uint64_t bound = support_bound(rates, start);
  const double alpha = *std::min_element(rates.begin(), rates.begin() + static_cast<std::ptrdiff_t>(bound));

  std::vector<double> u(start, 0.0);
  u[0] = 1.0;
  for (std::uint64_t j = 1; j < start; ++j) u[j] = std::max(0.0, u[j - 1] * (rates[j - 1] - alpha) / rates[j]);
  double total = 0.0;
  for (double x : u) total += x;

  OracleResult result{{}, alpha, "pure_death_recursion"};
  for (std::uint64_t j = 0; j < start; ++j) {
    if (j + 1 > bound && u[j] != 0.0) throw ContractViolation("pure_death_lcd: mass beyond the support bound");
    result.u[j + 1] = u[j] / total;
  }
  return result;
}

namespace {

std::vector<double> binomial_pmf(std::uint64_t n, double p) {
  std::vector<double> pmf(n + 1, 0.0);
  if (p <= 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf[n] = 1.0;
    return pmf;
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double ln = std::lgamma(static_cast<double>(n) + 1.0);
  for (std::uint64_t k = 0; k <= n; ++k) {
    const auto kd = static_cast<double>(k);
    const auto rest = static_cast<double>(n - k);
    pmf[k] = std::exp(ln - std::lgamma(kd + 1.0) - std::lgamma(rest + 1.0) + kd * lp + rest * lq);
  }
  return pmf;
}

/// Rows 1..D-1 of the Wright-Fisher kernel restricted to transient counts.
std::vector<std::vector<double>> wf_kernel(const WrightFisher& wf) {
  const std::uint64_t d = wf.population;
  std::vector<std::vector<double>> rows(d - 1, std::vector<double>(d - 1, 0.0));
  for (std::uint64_t x = 1; x < d; ++x) {
    const double fit1 = static_cast<double>(x) * (1.0 + wf.selection.first);
    const double p = fit1 / (fit1 + static_cast<double>(d - x) * (1.0 + wf.selection.second));
    const auto pmf = binomial_pmf(d, p);
    for (std::uint64_t y = 1; y < d; ++y) rows[x - 1][y - 1] = pmf[y];
  }
  return rows;
}

std::vector<double> left_multiply(const std::vector<double>& v, const std::vector<std::vector<double>>& rows) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) out[j] += v[i] * rows[i][j];
  }
  return out;
}

}  // namespace

OracleResult wf_lcd_power_iteration(std::uint64_t population, std::pair<double, double> selection, double tol,
                                    std::size_t max_iterations) {
  if (population > 200) throw UnsupportedOracle("power iteration is limited to D <= 200");
  const Model model(WrightFisher{population, selection});
  const auto rows = wf_kernel(std::get<WrightFisher>(model.spec()));
  const std::size_t n = rows.size();
  std::vector<double> v(n, 1.0 / static_cast<double>(n));
  double rho = 0.0;
  bool converged = false;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    auto next = left_multiply(v, rows);
    rho = 0.0;
    for (double x : next) rho += x;
    if (!(rho > 0.0)) throw NoConvergence("power iteration collapsed to zero");
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= rho;
      change = std::max(change, std::abs(next[i] - v[i]));
    }
    v.swap(next);
    if (change < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("power iteration did not converge");
  OracleResult result{{}, 1.0 - rho, "power_iteration"};
  for (std::size_t i = 0; i < n; ++i) result.u[i + 1] = v[i];
  return result;
}

double eigen_residual(const Model& model, const OracleResult& result) {
  if (const auto* wf = std::get_if<WrightFisher>(&model.spec())) {
    const auto rows = wf_kernel(*wf);
    std::vector<double> v(rows.size(), 0.0);
    for (const auto& [s, p] : result.u) {
      if (s >= 1 && s < wf->population) v[s - 1] = p;
    }
    const auto vp = left_multiply(v, rows);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(vp[i] - (1.0 - result.alpha) * v[i]));
    return worst;
  }
  // (u^T Q)_j = sum_i u_i q_ij - u_j q_j, collected over every state touched.
  Distribution lhs;
  for (const auto& [s, p] : result.u) {
    lhs[s] += result.alpha * p;
    for (const auto& tr : model.transitions(s)) {
      lhs[s] -= p * tr.rate;
      if (!model.is_absorbed(tr.target)) lhs[tr.target] += p * tr.rate;
    }
  }
  double worst = 0.0;
  for (const auto& [s, x] : lhs) worst = std::max(worst, std::abs(x));
  return worst;
}

double two_state_chain_step(double x, std::uint64_t n1, std::uint64_t n2, double delta, Rng& rng) {
  if (!(x >= 0.0 && x <= 1.0)) throw ContractViolation("two_state_chain_step: x must lie in [0, 1]");
  const auto a = static_cast<double>(n1);
  const auto b = static_cast<double>(n2);
  if (rng.uniform() * (a + delta * b) < a) return x * (a - 1.0) / (a - x);
  return x + (1.0 - x) / b;
}

LyapunovParams LyapunovParams::from(std::uint64_t n1, std::uint64_t n2, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw RegimeError("Lyapunov bound needs 0 < delta < 1");
  if (n1 < 2) throw RegimeError("Lyapunov bound needs N_1 >= 2");
  const auto b = static_cast<double>(n2);
  if (b < 5.0 || b < 1.0 / (1.0 - delta)) throw RegimeError("Lyapunov bound needs N_2 >= max(5, 1/(1-delta))");
  const auto a = static_cast<double>(n1);
  const double denom = (b - 1.0) * (a + delta * b);
  return {1.0 - (b * (1.0 - delta) - 1.0) / denom, delta * b / denom, n1, n2, delta};
}

namespace {

using boost::multiprecision::cpp_rational;

LyapunovVerdict drift_check_exact(const LyapunovParams& params, const std::vector<cpp_rational>& grid) {
  // Re-check the regime so hand-built params cannot bypass it.
  (void)LyapunovParams::from(params.n1, params.n2, params.delta);
  const cpp_rational a(params.n1);
  const cpp_rational b(params.n2);
  const cpp_rational delta(params.delta);
  const cpp_rational one(1);
  const cpp_rational denom = (b - 1) * (a + delta * b);
  const cpp_rational lambda = one - (b * (one - delta) - 1) / denom;
  const cpp_rational k = delta * b / denom;
  const cpp_rational p = a / (a + delta * b);
  auto v = [&](const cpp_rational& x) { return x / (one - x); };

  LyapunovVerdict verdict;
  bool first = true;
  for (const auto& x : grid) {
    if (x <= 0 || x >= 1) throw ContractViolation("Lyapunov grid points must lie in (0, 1)");
    const cpp_rational down = x * (a - 1) / (a - x);
    const cpp_rational up = x + (one - x) / b;
    const cpp_rational pv = p * v(down) + (one - p) * v(up);
    const cpp_rational margin = lambda * v(x) + k - pv;
    ++verdict.points;
    if (margin > 0) ++verdict.strict_holds;
    if (margin >= 0) ++verdict.nonstrict_holds;
    const double m = static_cast<double>(margin);
    verdict.min_margin = first ? m : std::min(verdict.min_margin, m);
    first = false;
  }
  verdict.pass = verdict.points > 0 && verdict.strict_holds == verdict.points;
  return verdict;
}

}  // namespace

LyapunovVerdict lyapunov_drift_check(const LyapunovParams& params, std::span<const double> grid) {
  std::vector<cpp_rational> exact;
  exact.reserve(grid.size());
  for (double x : grid) exact.emplace_back(x);
  return drift_check_exact(params, exact);
}

LyapunovVerdict lyapunov_drift_check(const LyapunovParams& params) {
  std::vector<cpp_rational> grid;
  for (int i = 1; i <= 99; ++i) grid.emplace_back(cpp_rational(i) / 100);
  return drift_check_exact(params, grid);
}

double ti_alpha(double beta, double gamma, double delta) {
  if (!(beta > 0.0) || !(delta > 0.0)) throw ContractViolation("ti_alpha needs beta > 0 and delta > 0");
  if (!(gamma > beta)) throw RegimeError("gamma <= beta: no limiting conditional distribution");
  return std::min(delta, gamma - beta);
}

}  // namespace qsd
