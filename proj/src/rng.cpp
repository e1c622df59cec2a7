#include "qsd/rng.hpp"

namespace qsd {

std::uint64_t Rng::binomial(std::uint64_t n, double p) noexcept {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);

  const double q = 1.0 - p;
  const double odds = p / q;
  const auto nd = static_cast<double>(n);
  double u = uniform();

  if (nd * p < 30.0) {
    // Sequential search from 0; q^n cannot underflow in this regime.
    double f = std::pow(q, nd);
    std::uint64_t x = 0;
    while (u >= f && x < n) {
      u -= f;
      f *= odds * static_cast<double>(n - x) / static_cast<double>(x + 1);
      ++x;
    }
    return x;
  }

  // Search outward from the mode, alternating sides.
  const auto mode = static_cast<std::uint64_t>(std::floor((nd + 1.0) * p));
  const auto md = static_cast<double>(mode);
  const double log_pmf = std::lgamma(nd + 1.0) - std::lgamma(md + 1.0) - std::lgamma(nd - md + 1.0) +
                         md * std::log(p) + (nd - md) * std::log(q);
  double f_hi = std::exp(log_pmf);
  double f_lo = f_hi;
  u -= f_hi;
  if (u < 0.0) return mode;
  std::uint64_t hi = mode;
  std::uint64_t lo = mode;
  while (hi < n || lo > 0) {
    if (hi < n) {
      f_hi *= odds * static_cast<double>(n - hi) / static_cast<double>(hi + 1);
      ++hi;
      u -= f_hi;
      if (u < 0.0) return hi;
    }
    if (lo > 0) {
      f_lo *= static_cast<double>(lo) / (static_cast<double>(n - lo + 1) * odds);
      --lo;
      u -= f_lo;
      if (u < 0.0) return lo;
    }
  }
  return mode;
}

}  // namespace qsd
