#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rbsde {

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit id of a named substream ("paths", "perturbations", ...).
std::uint64_t substream_id(std::string_view name);

/// Generator for one (seed, substream, index) triple. Streams for different indices are
/// independent of each other and of how many indices are drawn.
std::mt19937_64 make_stream(std::uint64_t seed, std::string_view substream, std::uint64_t index);

}  // namespace rbsde
