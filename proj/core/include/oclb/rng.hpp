#pragma once

#include <cstdint>
#include <random>

namespace oclb {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent stream seed for (seed, index, stream); counter-based so scenes
/// can be processed in any order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                    std::uint64_t stream = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2Dull)) + index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t index = 0, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, index, stream));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace oclb
