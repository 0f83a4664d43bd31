#pragma once

// PCG32 (XSH-RR output on a 64-bit LCG state, O'Neill 2014). Every stochastic
// draw in the simulator comes from here so streams are platform independent.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace handover {

class Pcg32 {
 public:
  Pcg32(std::uint64_t initstate, std::uint64_t initseq) { seed(initstate, initseq); }

  void seed(std::uint64_t initstate, std::uint64_t initseq) {
    state_ = 0;
    inc_ = (initseq << 1u) | 1u;
    next();
    state_ += initstate;
    next();
  }

  std::uint32_t next() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  /// Unbiased integer in [0, bound).
  std::uint32_t bounded(std::uint32_t bound) {
    const std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint32_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = next() >> 5;  // 27 bits
    const std::uint64_t lo = next() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly four 32-bit outputs.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next64() {
    const std::uint64_t hi = next();
    return (hi << 32) | next();
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

}  // namespace handover
