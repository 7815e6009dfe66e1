#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "abfr/errors.hpp"

namespace abfr {

// Seedable generator used everywhere randomness enters the pipeline.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The distributions below are written out by hand rather than taken
// from <random> because the standard distributions are implementation-defined;
// with these, a seed produces the same draws on every platform.
//
//   uniform_int(lo, hi): range = hi - lo + 1; limit = range * floor((2^64 - 1) / range);
//                        draw u until u < limit; return lo + u mod range.
//   uniform():           (u >> 11) * 2^-53, in [0, 1).
//   normal():            Box-Muller on two uniform() draws, cosine branch only.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ValidationError("uniform_int: empty range");
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return lo + static_cast<std::int64_t>(engine_());  // full 64-bit range
    const std::uint64_t limit = range * (UINT64_MAX / range);
    std::uint64_t u = engine_();
    while (u >= limit) u = engine_();
    return lo + static_cast<std::int64_t>(u % range);
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace abfr
