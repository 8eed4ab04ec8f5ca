#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace patchprint {

// SplitMix64 (Steele/Lea/Flood constants). This is the one PRNG used for
// every seeded decision in the library: patch origins, augmentation draws,
// corpus synthesis, parameter init, epoch shuffles. Bounded draws use plain
// modulo so the stream is trivial to reproduce in another language.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, n), n >= 1
  std::uint64_t bounded(std::uint64_t n) { return next() % n; }

  // [0, 1)
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

  // inclusive integer range
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(bounded(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Box-Muller, one variate per call (pair caching would make stream
  // position depend on call history).
  double gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }
};

// Deterministic stream derivation: fold each tag through the SplitMix64
// finalizer so (seed, tags...) -> independent-looking substream.
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  SplitMix64 r(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
  return r.next();
}

inline SplitMix64 derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = seed;
  for (std::uint64_t t : tags) s = mix64(s, t);
  return SplitMix64(s);
}

}  // namespace patchprint
