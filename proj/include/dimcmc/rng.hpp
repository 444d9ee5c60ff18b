// Deterministic random-number utilities. All variate generation goes through
// these helpers rather than std::*_distribution, so a seeded run replays
// bit-identically: mt19937_64 output is fixed by the standard, and the
// transformations below are plain IEEE arithmetic.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dimcmc {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Child-stream seed for (master, index); used for replicate seeding and the
// per-epoch CFTP streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x9e3779b97f4a7c15ull));
}

// Uniform on [0,1) with 53-bit resolution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform on (0,1]; safe under log().
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Standard normal, Box-Muller. One variate per call, fixed cost of two
// generator words, no cached spare.
inline double normal01(Rng& rng) {
  const double u1 = uniform_open01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.28318530717958647692528676655900577 * u2);
}

}  // namespace dimcmc
