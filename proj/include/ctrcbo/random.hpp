#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ctrcbo {

using RandomStream = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return mix_seed(mix_seed(mix_seed(base) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

// The standard distributions are implementation-defined; these are not, so
// seeded runs reproduce across standard libraries.
inline double uniform01(RandomStream& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(RandomStream& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ctrcbo
