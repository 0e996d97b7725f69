#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fairaudit {

// Stateless splitmix64 finalizer, used for seed derivation.
inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Derives an independent stream key from (master seed, purpose tag, indices).
// Every random draw in the engine is keyed this way so replicate r's
// randomness depends only on its tuple, never on execution order.
inline uint64_t derive_stream(uint64_t master, uint64_t tag, uint64_t a = 0,
                              uint64_t b = 0) {
  uint64_t h = mix64(master + 0x9E3779B97F4A7C15ULL);
  h = mix64(h ^ (tag + 0x9E3779B97F4A7C15ULL));
  h = mix64(h ^ (a + 0xBF58476D1CE4E5B9ULL));
  h = mix64(h ^ (b + 0x94D049BB133111EBULL));
  return h;
}

inline constexpr uint64_t kStreamPermutation = 0x7065726dULL;
inline constexpr uint64_t kStreamBootstrap = 0x626f6f74ULL;
inline constexpr uint64_t kStreamSynth = 0x73796e74ULL;

// xoshiro256++, self-contained so output does not depend on the standard
// library's engine or distribution implementations.
class Rng {
public:
  explicit Rng(uint64_t seed_key) {
    uint64_t s = seed_key;
    for (auto& w : state_) {
      s += 0x9E3779B97F4A7C15ULL;
      w = mix64(s);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Unbiased bounded draw (Lemire with rejection).
  uint64_t uniform_below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      __uint128_t m = static_cast<__uint128_t>(r) * bound;
      if (static_cast<uint64_t>(m) >= threshold) {
        return static_cast<uint64_t>(m >> 64);
      }
    }
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Box-Muller; draws two uniforms per value, no rejection loop.
  double normal(double mu = 0.0, double sd = 1.0) {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    return mu + sd * z;
  }

private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t state_[4];
};

template <class T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace fairaudit
