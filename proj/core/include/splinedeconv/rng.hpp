#pragma once

#include <cstdint>

#include <boost/random/mersenne_twister.hpp>

namespace splinedeconv {

using Rng = boost::random::mt19937_64;

/// Roles that get their own random stream inside a replicate.
enum class StreamRole : std::uint64_t { x = 1, u = 2, eps = 3, bootstrap = 4, theta = 5 };

/// SplitMix64 finaliser; a bijective mixer of 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Generator keyed by (seed, replicate, role). Streams depend only on the
/// key, so results do not depend on the order in which replicates run.
inline Rng make_stream(std::uint64_t seed, std::uint64_t replicate, StreamRole role) {
  const std::uint64_t key =
      mix64(mix64(mix64(seed) ^ replicate) ^ static_cast<std::uint64_t>(role));
  return Rng(key);
}

/// Uniform draw on (0,1) from the top 53 bits; never returns 0.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace splinedeconv
