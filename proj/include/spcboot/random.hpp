#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spcboot {

using RngStream = std::mt19937_64;

/// Independent substream keyed by (master seed, key path). The same key path
/// always yields the same stream, regardless of which worker asks for it.
RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> keys);

// Stream-purpose tags used in key paths.
namespace stream_tag {
inline constexpr std::uint64_t phase1 = 0x5048'4153'4531ULL;
inline constexpr std::uint64_t bootstrap = 0x424f'4f54ULL;
inline constexpr std::uint64_t retry = 0x5245'5452'59ULL;
inline constexpr std::uint64_t truth = 0x5452'5554'48ULL;
inline constexpr std::uint64_t monte_carlo = 0x4d43ULL;
}  // namespace stream_tag

}  // namespace spcboot
