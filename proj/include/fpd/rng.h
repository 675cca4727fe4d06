#pragma once

#include <cstdint>
#include <random>

namespace fpd {

using Rng = std::mt19937_64;

// Independent generator for (master seed, stream, index). Streams separate the
// consumers of one master seed (phase draws, speckle, shuffling, ...), so adding
// a draw to one consumer never shifts another.
inline Rng derive_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

// Uniform in [0, 1).
inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

namespace stream {
inline constexpr std::uint64_t kPhase = 1;
inline constexpr std::uint64_t kScene = 2;
inline constexpr std::uint64_t kSpeckle = 3;
inline constexpr std::uint64_t kAwgn = 4;
inline constexpr std::uint64_t kAwgnSelect = 5;
inline constexpr std::uint64_t kAugment = 6;
inline constexpr std::uint64_t kInit = 7;
inline constexpr std::uint64_t kShuffle = 8;
inline constexpr std::uint64_t kSplit = 9;
}  // namespace stream

}  // namespace fpd
