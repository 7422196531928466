#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cvr {

using Rng = std::mt19937_64;

// FNV-1a over the bytes of `text`; stable across platforms and runs.
std::uint64_t stable_hash(std::string_view text);
std::uint64_t mix64(std::uint64_t x);

// Child seeds for independent streams: (seed, tag) pairs map to decorrelated
// generator seeds, so per-query / per-epoch streams do not depend on the
// order in which they are requested.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

double uniform01(Rng& rng);

}  // namespace cvr
