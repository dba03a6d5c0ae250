#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mtlseg {

// All randomness in the project flows through these helpers. std::mt19937 is
// bit-deterministic by the standard, but the standard distributions are not,
// so the transforms are spelled out here.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent engine for (seed, stream); used to give scenes,
// splits and epochs their own reproducible streams.
inline std::mt19937 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    const std::uint64_t mixed = splitmix64(seed * 0x100000001b3ull + stream);
    return std::mt19937(static_cast<std::uint32_t>(mixed ^ (mixed >> 32)));
}

// Uniform in [0, 1) with 24 bits of mantissa.
inline float uniform_float(std::mt19937& g) {
    return static_cast<float>(g() >> 8) * (1.0f / 16777216.0f);
}

inline float uniform_range(std::mt19937& g, float lo, float hi) {
    return lo + uniform_float(g) * (hi - lo);
}

// Uniform integer in [lo, hi], inclusive.
inline int uniform_int(std::mt19937& g, int lo, int hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>((static_cast<std::uint64_t>(g()) * span) >> 32);
}

// Standard normal via Box-Muller.
inline float normal_float(std::mt19937& g) {
    float u1 = uniform_float(g);
    const float u2 = uniform_float(g);
    if (u1 < 1e-12f) u1 = 1e-12f;
    const float r = std::sqrt(-2.0f * std::log(u1));
    return r * std::cos(6.28318530717958647692f * u2);
}

}  // namespace mtlseg
