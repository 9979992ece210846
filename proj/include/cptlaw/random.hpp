#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cptlaw {

// Deterministic draws on top of mt19937_64. The standard pins the engine's
// output sequence but not the distribution adaptors, so the mappings are
// done by hand to keep seeded results identical across toolchains.

/// Uniform double in [0, 1) using the top 53 bits of the engine output.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

/// Log-uniform over [lo, hi], lo > 0.
inline double log_uniform(std::mt19937_64& gen, double lo, double hi) {
    return std::exp(uniform(gen, std::log(lo), std::log(hi)));
}

/// Standard normal via Box-Muller; consumes exactly two engine outputs.
inline double normal01(std::mt19937_64& gen) {
    double u1 = 1.0 - uniform01(gen);  // (0, 1]
    double u2 = uniform01(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace cptlaw
