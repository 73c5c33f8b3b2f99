#pragma once

#include <cstdint>
#include <random>

namespace copolicy {

/// Engine used for every random draw in the library.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer: a bijection on 64-bit words with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed splitting. The seed for replication `replication` of the
/// scenario identified by `scenario_key` depends only on the three inputs, never
/// on execution order. For fixed (master, scenario_key) the map is injective in
/// `replication`, and for fixed master it is injective in `scenario_key`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t scenario_key,
                                    std::uint64_t replication) noexcept {
  const std::uint64_t scenario_stream = mix64(master ^ mix64(scenario_key + 0x9e3779b97f4a7c15ULL));
  return mix64(scenario_stream ^ replication);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t scenario_key, std::uint64_t replication) {
  return Rng(derive_seed(master, scenario_key, replication));
}

}  // namespace copolicy
