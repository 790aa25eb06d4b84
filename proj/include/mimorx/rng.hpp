#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mimorx {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed derivation rule: each index (frame number, stream tag, ...) is mixed
/// into the running seed in order. derive_seed(s, {a, b}) != derive_seed(s, {b, a}).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(master);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

// Stream tags so that independent draws inside one frame never share a seed.
namespace stream {
inline constexpr std::uint64_t channel = 1;
inline constexpr std::uint64_t bits = 2;
inline constexpr std::uint64_t noise_pilot = 3;
inline constexpr std::uint64_t noise_data = 4;
inline constexpr std::uint64_t snr = 5;
inline constexpr std::uint64_t mld_fill = 6;
inline constexpr std::uint64_t weights = 7;
inline constexpr std::uint64_t shuffle = 8;
inline constexpr std::uint64_t split = 9;
inline constexpr std::uint64_t augment = 10;
}  // namespace stream

}  // namespace mimorx
