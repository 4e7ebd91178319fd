#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cupgan {

using Rng = std::mt19937_64;

// splitmix64 mix step; used to derive stream seeds (e.g. per-epoch shuffle
// seeds) from a master seed without correlations between streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform double in [0, 1) with 53 random bits. Defined here (rather than
// via std::uniform_real_distribution) so the value sequence depends only on
// the engine state and serializes with it.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller with no cached second variate, so the
// checkpointed RNG state is the engine state alone.
inline double normal_sample(Rng& rng) {
    double u1 = 0.0;
    do {
        u1 = uniform01(rng);
    } while (u1 == 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace cupgan
