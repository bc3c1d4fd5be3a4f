#pragma once

#include <cstdint>
#include <random>

#include "rcabs/types.hpp"

namespace rcabs {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent seed for a named purpose derived from a base seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL));
}

// Stream tags for the draws that are not part of reservoir construction.
enum class Stream : std::uint64_t {
  reservoir_build = 1,
  initial_state = 2,
  prepare_state = 3,
  probe = 4,
};

inline std::uint64_t substream_seed(std::uint64_t seed, Stream stream,
                                    std::uint64_t index = 0) {
  return substream_seed(substream_seed(seed, static_cast<std::uint64_t>(stream)), index);
}

/// Reservoir initial condition r(0) ~ uniform(-1, 1)^n.
inline Vec uniform_state(Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vec r(n);
  for (Index i = 0; i < n; ++i) r[i] = dist(gen);
  return r;
}

}  // namespace rcabs
