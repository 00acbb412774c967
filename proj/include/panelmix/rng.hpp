#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace panelmix {

using Rng = std::mt19937_64;

/// One splitmix64 step; a bijective mixer used to derive independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for a sub-stream identified by a path of indices, e.g. (seed, cell, rep).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(seed);
  for (auto k : path) s = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
  return s;
}

}  // namespace panelmix
