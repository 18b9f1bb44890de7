#pragma once

#include <stdexcept>
#include <string>

namespace rooftop {

/// Bad user configuration: CLI flags, config JSON, out-of-range arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular systems, rank collapse, non-finite losses.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric whose definition does not apply to the given data
/// (e.g. MG with no sign-consistent points, NMSE with a zero denominator).
class MetricUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

}  // namespace rooftop
