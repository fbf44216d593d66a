#pragma once

#include <cstdint>
#include <random>

namespace mcinf {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective mixer used to decorrelate seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for sub-stream `stream` of `master`. Distinct streams of one master
/// seed behave as independent generators.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Named sub-streams so that e.g. the sampling mask can be reused while the
// noise is redrawn.
namespace stream {
inline constexpr std::uint64_t truth = 0x7472757468ULL;
inline constexpr std::uint64_t mask = 0x6d61736bULL;
inline constexpr std::uint64_t noise = 0x6e6f697365ULL;
inline constexpr std::uint64_t pairs = 0x7061697273ULL;
inline constexpr std::uint64_t trial = 0x747269616cULL;
}  // namespace stream

}  // namespace mcinf
