#pragma once

#include <stdexcept>
#include <string>

namespace splinedeconv {

/// Malformed configuration or invalid arguments supplied by a caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data that cannot be used (missing columns, out-of-range values, too few rows).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit or run that did not reach its stopping criterion often enough to be trusted.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, singular systems and similar numerical breakdowns.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace splinedeconv
