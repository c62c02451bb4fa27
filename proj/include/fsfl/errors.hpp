#pragma once

#include <stdexcept>

namespace fsfl {

/// Invalid configuration: bad hyperparameter, unsupported layer setup,
/// malformed experiment config. CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or degenerate data: parse failures, labels out of range,
/// datasets too short for the requested operation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required (gradients, losses).
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fsfl
