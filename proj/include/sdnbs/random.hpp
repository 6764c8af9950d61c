#pragma once

// Seedable, splittable random streams for the Monte Carlo simulator.
//
// The generator is xoshiro256** (Blackman & Vigna). Its 256-bit state is
// filled from SplitMix64, keyed by (seed, stream index), so every simulated
// slot owns an independent stream that does not depend on which thread runs
// it or in what order.

#include <array>
#include <bit>
#include <cstdint>
#include <limits>

namespace sdnbs {

/// SplitMix64; also serves as a 64-bit mixing function.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

class Xoshiro256StarStar {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256StarStar(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& word : s_) word = sm();
  }

  /// Stream `index` of the family identified by `seed`.
  static Xoshiro256StarStar stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 key(seed);
    const std::uint64_t base = key();
    SplitMix64 mix(index ^ 0xD1B54A32D192ED03ULL);
    return Xoshiro256StarStar(base ^ mix());
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = std::rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in the open interval (0, 1).
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, range), Lemire's multiply-shift with rejection.
  std::uint64_t bounded(std::uint64_t range) {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
      const std::uint64_t threshold = (0 - range) % range;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * range;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace sdnbs
