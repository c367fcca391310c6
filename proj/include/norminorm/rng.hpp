#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace norminorm {

/// Random plumbing. The engine is std::mt19937_64 (its output sequence is
/// fixed by the standard); the distributions are hand-rolled because the
/// standard ones are implementation-defined, and reproducibility across
/// toolchains is part of this library's contract.

/// splitmix64 finalizer; used to derive independent stream seeds from a base
/// seed so that adding a consumer never shifts the draws of existing ones.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double unit_uniform(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * unit_uniform(gen);
}

/// Standard normal via Box-Muller (cosine branch).
inline double standard_normal(std::mt19937_64& gen) {
    double u1;
    do {
        u1 = unit_uniform(gen);
    } while (u1 <= 0.0);
    const double u2 = unit_uniform(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Unbiased integer in [0, n) via rejection sampling.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t r = gen();
        if (r >= threshold) return r % n;
    }
}

/// Fisher-Yates shuffle driven by `bounded`, so the permutation sequence is
/// reproducible everywhere (std::shuffle is not).
template <typename T>
inline void shuffle(std::vector<T>& v, std::mt19937_64& gen) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded(gen, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace norminorm
