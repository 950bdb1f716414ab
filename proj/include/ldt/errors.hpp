#pragma once

#include <stdexcept>
#include <string>

namespace ldt {

/// Bad user-facing configuration (unknown keys, invalid ranges, missing files).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Mismatched grids, widths or dimensions between objects that must agree.
struct dimension_error : std::invalid_argument {
  explicit dimension_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical breakdown: non-finite state, blow-up, iteration divergence.
struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// A mathematical assumption of the method fails (e.g. an eigenvalue of the
/// projected second variation reaches 1, or a Riccati bracket turns singular).
struct assumption_error : std::runtime_error {
  explicit assumption_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ldt
