#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace wpt {

// Draw helpers built directly on the engine output so that results do not
// depend on the standard library's distribution implementations.

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

/// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// Independent stream for (seed, a, b), seeded through std::seed_seq.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace wpt
