#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ewa {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed, a fixed label and
/// up to three indices. Same inputs always give the same seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::uint64_t i = 0, std::uint64_t j = 0,
                          std::uint64_t k = 0);

inline Rng make_rng(std::uint64_t base, std::string_view label,
                    std::uint64_t i = 0, std::uint64_t j = 0, std::uint64_t k = 0) {
    return Rng(derive_seed(base, label, i, j, k));
}

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(rng);
}

inline double uniform01(Rng& rng) {
    // 53 random bits, never exactly 0
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace ewa
