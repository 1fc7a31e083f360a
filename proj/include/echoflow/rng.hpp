#pragma once

#include <cmath>
#include <cstdint>

namespace echoflow {

/// PCG32 (PCG-XSH-RR 64/32, O'Neill 2014): 64-bit LCG state with an
/// xorshift-high + random-rotate output stage. Pinned as the project's only
/// random generator so that seeded runs reproduce bit-identically across
/// platforms and standard-library versions. Gaussian draws use Box-Muller on
/// top of the same stream (the second variate of each pair is cached).
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0xda3e39cb94b95bdbULL) {
    state_ = 0u;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  /// Uniform double in [0, 1) with 32-bit resolution.
  double next_unit() { return next_u32() * 0x1p-32; }

  /// Unbiased uniform integer in [0, bound) via rejection sampling.
  std::uint32_t next_below(std::uint32_t bound) {
    std::uint32_t threshold = (0u - bound) % bound;
    for (;;) {
      std::uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  /// Standard normal variate (Box-Muller, polar angle second).
  double next_gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] keeps the log finite.
    double u1 = (static_cast<double>(next_u32()) + 1.0) * 0x1p-32;
    double u2 = next_unit();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * 3.14159265358979323846 * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace echoflow
