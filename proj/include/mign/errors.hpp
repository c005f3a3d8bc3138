#pragma once

#include <stdexcept>

namespace mign {

// Invalid configuration or usage (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or insufficient input data (CLI exit code 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values produced during optimization (CLI exit code 3).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor or vector dimension mismatch.
struct ShapeError : std::logic_error {
  using std::logic_error::logic_error;
};

// Argument outside its mathematical domain (latitude out of range,
// |x| > 1 for Legendre evaluation, order above degree, ...).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace mign
