#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dysent {

using Rng = std::mt19937_64;

// Derives an independent stream from a base seed. Used so that e.g. each
// snapshot perturbation or each training iteration gets its own engine and
// stays reproducible regardless of how much randomness other parts consume.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  // splitmix64 on the pair; avoids correlated mt19937 seedings.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return Rng(z);
}

inline double uniform_real(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Uniform integer in [lo, hi] inclusive.
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double gumbel(Rng& rng) {
  // Inverse CDF; clamp away from 0 and 1 so the logs stay finite.
  double u = uniform_real(rng);
  u = std::min(std::max(u, 1e-300), 1.0 - 1e-16);
  return -std::log(-std::log(u));
}

inline double normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace dysent
