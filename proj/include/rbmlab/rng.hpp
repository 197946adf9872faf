#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rbmlab {

// Seeding contract (bit-exact, part of the reproducibility guarantee):
//
//   splitmix64_mix(z):
//     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//     return z ^ (z >> 31)
//
//   path_seed(master, index) =
//     splitmix64_mix(master + 0x9E3779B97F4A7C15 * (index + 1))
//
// The per-path generator is xoshiro256** whose four state words are the
// first four outputs of a SplitMix64 stream started at path_seed.
// Gaussians come from the Box-Muller transform on 53-bit uniforms; both
// outputs of a pair are used, cosine branch first.

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index) noexcept {
  return splitmix64_mix(master_seed + kGoldenGamma * (path_index + 1));
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  constexpr std::uint64_t next() noexcept {
    state_ += kGoldenGamma;
    return splitmix64_mix(state_);
  }

 private:
  std::uint64_t state_;
};

class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256ss(std::uint64_t seed) noexcept {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Xoshiro256ss& g) noexcept {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Per-path random stream: uniform and standard-normal draws.
class PathRng {
 public:
  PathRng(std::uint64_t master_seed, std::uint64_t path_index) noexcept
      : gen_(path_seed(master_seed, path_index)) {}

  double uniform() noexcept { return uniform01(gen_); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01(gen_);  // (0, 1]
    const double u2 = uniform01(gen_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  Xoshiro256ss gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rbmlab
