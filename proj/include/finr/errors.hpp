#pragma once

#include <stdexcept>
#include <string>

namespace finr {

/// Invalid configuration or argument; CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A theorem hypothesis required by an operation is violated; exit code 3.
struct HypothesisError : std::runtime_error {
  explicit HypothesisError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical divergence during iteration; exit code 4.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace finr
