#pragma once

#include <cstdint>
#include <random>

namespace rsctl {

/// SplitMix64 finalizer; used to hash (seed, path, channel) into an engine seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream identifier for path `path` under run seed `seed`; `channel` separates
/// the Brownian and Poisson draws of one path.
inline std::uint64_t stream_id(std::uint64_t seed, std::uint64_t path, std::uint64_t channel) {
  return mix64(mix64(mix64(seed) ^ path) ^ (channel * 0xd1b54a32d192ed03ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t path, std::uint64_t channel) {
  return Engine(stream_id(seed, path, channel));
}

}  // namespace rsctl
