#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace credsets {

/// Random source used throughout the library. Callers own engines; nothing
/// here keeps global generator state.
using Engine = std::mt19937_64;

/// Ziggurat sampler. Consumes a variable number of engine outputs per call but
/// is deterministic for a fixed engine state.
using StandardNormal = boost::random::normal_distribution<double>;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the seed of stream `index` from `master`. Stable across platforms
/// and independent of evaluation order, so replication r can be rerun alone.
constexpr std::uint64_t stable_mix(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t seed) {
  // seed_seq spreads a 64-bit seed over the full mt19937_64 state.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

}  // namespace credsets
