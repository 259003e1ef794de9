#pragma once

#include <cstdint>
#include <cmath>

namespace facefit {

inline std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based stream: the state is a hash of (seed, a, b, c), so any
// (pixel, sample, purpose) key yields the same sequence regardless of
// evaluation order or prior draws.  Used for all Monte-Carlo sampling.
struct Rng {
  std::uint64_t state = 0;

  static Rng keyed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
    Rng r;
    r.state = seed ^ 0x2545f4914f6cdd1dull;
    (void)splitmix64(r.state);
    r.state ^= a * 0x9e3779b97f4a7c15ull;
    (void)splitmix64(r.state);
    r.state ^= b * 0xd6e8feb86659fd93ull;
    (void)splitmix64(r.state);
    r.state ^= c * 0xa24baed4963ee407ull;
    (void)splitmix64(r.state);
    return r;
  }

  std::uint64_t next_u64() { return splitmix64(state); }

  // [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n); multiply-shift on the top 64 bits.
  std::uint32_t next_below(std::uint32_t n) {
    return std::uint32_t((unsigned __int128)(next_u64()) * n >> 64);
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream layout simple.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

}  // namespace facefit
