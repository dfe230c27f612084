// SPDX-License-Identifier: Apache-2.0
//
// Seedable 64-bit generator and substream derivation for reproducible
// parallel Monte Carlo. Every (cell, worker) pair gets its own generator whose
// seed depends only on (master_seed, cell_index, worker_index).
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

namespace corrtrans {

/// SplitMix64 finalizer: a bijective 64-bit avalanche mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// Advances a SplitMix64 state and returns the next output.
constexpr std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  return mix64(state);
}

constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t cell_index, std::uint64_t worker_index) {
  std::uint64_t h = mix64(master_seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (cell_index + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ (worker_index + 0x85157af5ULL * 0x100000001ULL));
  return h;
}

/// xoshiro256++ seeded through SplitMix64. Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
public:
  using result_type = std::uint64_t;

  explicit constexpr Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
};

/// Two independent N(0, 1) variates by Marsaglia's polar method.
template <typename Rng>
std::pair<double, double> normal_pair(Rng& rng) {
  for (;;) {
    const double u = 2.0 * rng.uniform01() - 1.0;
    const double v = 2.0 * rng.uniform01() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      const double f = std::sqrt(-2.0 * std::log(s) / s);
      return {u * f, v * f};
    }
  }
}

}  // namespace corrtrans
