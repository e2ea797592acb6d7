#pragma once

#include <stdexcept>
#include <string>

namespace photon_da {

/// Raised when inputs violate a documented precondition: shape mismatches,
/// malformed files, bad configuration values. Maps to CLI exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when a computation fails at runtime despite valid inputs:
/// non-finite values, diverging optimization, failed numeric checks.
/// Maps to CLI exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace photon_da
