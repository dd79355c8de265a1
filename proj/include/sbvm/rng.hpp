#pragma once

#include <cstdint>
#include <random>

namespace sbvm {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; decorrelates (seed, stream) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream `stream` derived from `seed`. Replicate r of an
// experiment uses make_stream(seed, r) so results do not depend on the
// order in which replicates run.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL)));
}

}  // namespace sbvm
