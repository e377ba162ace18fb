#pragma once

#include <cstdint>
#include <random>

namespace precise {

using Rng = std::mt19937_64;

// splitmix64 finalizer over (base, stream): independent seeds for the subset
// draw, model init, batch shuffling, ... of one run.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace seed_stream {
inline constexpr std::uint64_t kSubset = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kSynthetic = 4;
inline constexpr std::uint64_t kSyntheticTest = 5;
}  // namespace seed_stream

}  // namespace precise
