#pragma once

namespace ldt {

/// Time stepping schemes. Both use the problem's linear part as an exact
/// integrating factor when available (and reduce to plain Euler / Heun when
/// not). Backward sweeps are the exact transposes of the forward maps on the
/// same grid.
enum class Scheme {
  euler_if,
  rk2_if,
};

struct IntegratorConfig {
  Scheme scheme = Scheme::rk2_if;
  /// Ignore the problem's linear part (mainly for cross-checks).
  bool use_linear_part = true;
};

}  // namespace ldt
