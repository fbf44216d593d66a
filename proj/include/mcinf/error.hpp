#pragma once

#include <stdexcept>
#include <string>

namespace mcinf {

/// Invalid input or configuration (bad dimensions, out-of-range parameters).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation could not be completed: singular Gram, non-SPD input,
/// solver divergence, non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mcinf
