#pragma once

#include <array>
#include <cstdint>

namespace ldt {

/// Philox4x32-10 counter-based generator. Stateless: every block of four
/// 32-bit words is a pure function of (key, counter), so parallel draws
/// keyed by (seed, sample index, step index, block) are bitwise
/// reproducible for any execution order.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        std::uint64_t key);

/// Inverse of the standard normal CDF (Wichura's AS241, double precision).
/// Requires 0 < p < 1.
double inverse_normal_cdf(double p);

/// Standard normal CDF and upper tail, in terms of std::erfc.
double normal_cdf(double x);
double normal_upper_tail(double x);

/// Deterministic stream of standard normal variates addressed by
/// (seed, sample, step, index). Uniforms are 53-bit and mapped through the
/// inverse CDF.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  /// Uniform draw in the open interval (0, 1).
  double uniform(std::uint64_t sample, std::uint64_t step, std::uint32_t index) const;
  double normal(std::uint64_t sample, std::uint64_t step, std::uint32_t index) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace ldt
