#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace credfed {

using Rng = std::mt19937_64;

// All randomness flows from one root seed through named substreams, so
// e.g. the data stream for a given seed is the same no matter which
// federation strategy consumes it afterwards.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t a = 0,
                          std::uint64_t b = 0);

Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t a = 0, std::uint64_t b = 0);

std::uint64_t splitmix64(std::uint64_t x);

// 64-bit FNV-1a, used for config and dataset fingerprints.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace credfed
