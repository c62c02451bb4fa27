#pragma once

#include <cmath>
#include <cstdint>

namespace fsfl {

namespace detail {
inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace detail

/// xoshiro256** seeded through splitmix64. All sampling in the simulator goes
/// through this generator so results are identical across platforms and across
/// serial/parallel execution. Streams are derived by key, never shared.
struct Rng {
  uint64_t s[4] = {1, 2, 3, 4};

  static Rng seeded(uint64_t seed) {
    Rng r;
    uint64_t x = seed;
    for (auto& w : r.s) w = detail::splitmix64(x);
    return r;
  }

  /// Stream keyed by (seed, a, b, c); used as (replicate seed, round, client id)
  /// or (seed, purpose tag, index). Distinct keys give independent streams.
  static Rng keyed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t x = seed;
    uint64_t h = detail::splitmix64(x);
    x = h ^ (a + 0x9e3779b97f4a7c15ULL);
    h = detail::splitmix64(x);
    x = h ^ (b + 0xc2b2ae3d27d4eb4fULL);
    h = detail::splitmix64(x);
    x = h ^ (c + 0x165667b19e3779f9ULL);
    return seeded(detail::splitmix64(x));
  }

  uint64_t next_u64() {
    const uint64_t result = detail::rotl(s[1] * 5, 7) * 9;
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = detail::rotl(s[3], 45);
    return result;
  }

  /// Uniform in [0,1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi], inclusive. Rejection-sampled, unbiased.
  int uniform_int(int lo, int hi) {
    const uint64_t n = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<int>(x % n);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller (no cached spare, so the stream position
  /// is a pure function of the call count).
  double gaussian() {
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }
};

/// Purpose tags for deriving sub-streams from one experiment seed.
enum class RngTag : uint64_t {
  ModelInit = 1,
  ClientSelect = 2,
  ClientTrain = 3,
  LabeledSubset = 4,
  Partition = 5,
  SynthChain = 6,
  SynthNoise = 7,
  ServerTrain = 8,
  PseudoLabel = 9,
};

inline Rng tagged_rng(uint64_t seed, RngTag tag, uint64_t a = 0, uint64_t b = 0) {
  return Rng::keyed(seed, static_cast<uint64_t>(tag), a, b);
}

}  // namespace fsfl
