#pragma once

#include <cstdint>
#include <random>

namespace gadoa {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a global seed and a stream id
/// (splitmix64 finalizer over both words).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(derive_seed(seed, stream));
}

}  // namespace gadoa
