#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ldt/rng.hpp"

using namespace ldt;

// Published Philox4x32-10 known-answer vectors (counter words, 64-bit key
// assembled as key_hi << 32 | key_lo).
TEST_CASE("philox4x32-10 known answers") {
  {
    auto out = philox4x32({0u, 0u, 0u, 0u}, 0u);
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          0xffffffffffffffffull);
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    auto out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          0x299f31d0a4093822ull);
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("inverse normal cdf reference values") {
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.9599639845400545).epsilon(1e-13));
  CHECK(inverse_normal_cdf(0.01) == doctest::Approx(-2.3263478740408408).epsilon(1e-13));
  CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  // symmetry
  for (double p : {0.0001, 0.137, 0.25, 0.499}) {
    CHECK(inverse_normal_cdf(p) == doctest::Approx(-inverse_normal_cdf(1.0 - p)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::domain_error);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::domain_error);
}

TEST_CASE("inverse cdf inverts the cdf") {
  for (double p = 0.02; p < 1.0; p += 0.02) {
    CHECK(normal_cdf(inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(normal_upper_tail(0.0) == doctest::Approx(0.5));
  CHECK(normal_upper_tail(3.0) == doctest::Approx(0.0013498980316300945).epsilon(1e-12));
  CHECK(normal_upper_tail(-1.0) + normal_cdf(-1.0) == doctest::Approx(1.0));
}

TEST_CASE("uniform draws live strictly inside (0,1) with the right moments") {
  CounterRng rng(42);
  const long n = 200000;
  double sum = 0.0, sum2 = 0.0, lo = 1.0, hi = 0.0;
  for (long s = 0; s < n; ++s) {
    const double u = rng.uniform(static_cast<std::uint64_t>(s), 0, 0);
    sum += u;
    sum2 += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal draws have the right moments") {
  CounterRng rng(7);
  const long n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (long s = 0; s < n; ++s) {
    const double x = rng.normal(static_cast<std::uint64_t>(s), 3, 1);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) <= 0.01);
  CHECK(sum2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("draws are a pure function of (seed, sample, step, index)") {
  CounterRng a(99), b(99), c(100);
  CHECK(a.uniform(5, 7, 3) == b.uniform(5, 7, 3));
  CHECK(a.uniform(5, 7, 3) != c.uniform(5, 7, 3));
  CHECK(a.uniform(5, 7, 3) != a.uniform(5, 7, 2));
  CHECK(a.uniform(5, 7, 3) != a.uniform(5, 8, 3));
  CHECK(a.uniform(5, 7, 3) != a.uniform(6, 7, 3));
  // repeated evaluation is stateless
  const double first = a.normal(1, 2, 0);
  CHECK(a.normal(1, 2, 0) == first);
}

TEST_CASE("adjacent index pairs come from one block but differ") {
  CounterRng rng(1);
  // indices 0,1 share a block (lanes 0/2), 2,3 the next block
  const double u0 = rng.uniform(0, 0, 0);
  const double u1 = rng.uniform(0, 0, 1);
  const double u2 = rng.uniform(0, 0, 2);
  CHECK(u0 != u1);
  CHECK(u1 != u2);
}
