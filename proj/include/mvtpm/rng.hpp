#pragma once

// Seeded randomness helpers. Distributions are implemented directly on the
// raw engine output so that identical seeds give identical streams on every
// platform (the standard-library distributions are implementation defined).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mvtpm/types.hpp"

namespace mvtpm {

using RngEngine = std::mt19937_64;

inline RngEngine seeded_engine(std::uint64_t seed) { return RngEngine(seed); }

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(RngEngine& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

inline double uniform_in(RngEngine& engine, double lo, double hi) {
    return lo + (hi - lo) * uniform01(engine);
}

/// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
inline double normal01(RngEngine& engine) {
    double u1 = uniform01(engine);
    while (u1 <= 0.0) u1 = uniform01(engine);
    const double u2 = uniform01(engine);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::uint64_t uniform_below(RngEngine& engine, std::uint64_t n) {
    return n == 0 ? 0 : engine() % n;
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<Index> random_permutation(Index n, RngEngine& engine) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(uniform_below(engine, static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

}  // namespace mvtpm
