#pragma once

#include <cstdint>

namespace unetseg {

// One step of the splitmix64 generator (Steele/Lea/Flood 2014).
// Advances `state` and returns the next output. Used to expand seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Derived seed for item `index` of a stream rooted at `base`.
// seed_i = splitmix64(base + (index + 1) * 0x9E3779B97F4A7C15).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

// xoshiro256** (Blackman & Vigna 2018). The four state words are the first
// four outputs of splitmix64 seeded with `seed`, so every seed is usable,
// including 0.
//
// Derived values are built from IEEE-754 arithmetic only (no libm), so a
// reimplementation in any language reproduces the exact same doubles:
//   uniform01 = (next_u64() >> 11) * 2^-53                    in [0, 1)
//   gaussian  = sum of 12 uniform01 draws, left to right, - 6.0
//               (mean 0, unit variance, truncated at +-6)
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform01();
    double uniform(double lo, double hi);  // lo + uniform01 * (hi - lo)
    double gaussian();
    // Integer in [0, bound) via floor(uniform01 * bound); bound >= 1.
    std::int64_t below(std::int64_t bound);

  private:
    std::uint64_t s_[4];
};

}  // namespace unetseg
