#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qsd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

/// A precondition of an operation was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ContractViolation"; }
};

/// Every particle has been absorbed; the sampler cannot continue.
class AllAbsorbed : public Error {
 public:
  AllAbsorbed() : Error("all particles absorbed (total weight is zero)") {}
  const char* kind() const noexcept override { return "AllAbsorbed"; }
};

/// A seeded region with a positive target holds no particles at resampling.
class RegionExtinct : public Error {
 public:
  explicit RegionExtinct(std::size_t region)
      : Error("region " + std::to_string(region) + " has no particles to resample from"),
        region_(region) {}
  const char* kind() const noexcept override { return "RegionExtinct"; }
  std::size_t region() const noexcept { return region_; }

 private:
  std::size_t region_;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "NoConvergence"; }
};

/// Parameters outside the regime where a result is valid.
class RegimeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "RegimeError"; }
};

class UnsupportedOracle : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "UnsupportedOracle"; }
};

class EmptyLog : public Error {
 public:
  EmptyLog() : Error("run log holds no samples") {}
  const char* kind() const noexcept override { return "EmptyLog"; }
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ConfigError"; }
};

}  // namespace qsd
