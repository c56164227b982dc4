#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "pbql/errors.hpp"

namespace pbql {

/** All randomness in the library flows through this engine type.
    Distributions are sampled by hand (below) rather than through
    std:: distribution objects, whose output is not specified and
    differs across standard libraries; this keeps seeded runs
    byte-identical everywhere. */
using Rng = std::mt19937_64;

/** Uniform double in [0, 1) using the top 53 bits of one engine draw. */
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/** Uniform double in [lo, hi); degenerate intervals return lo. */
inline double uniform_in(Rng& rng, double lo, double hi) {
    return lo + uniform01(rng) * (hi - lo);
}

/** One Bernoulli(p) draw as 0/1. */
inline int bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p ? 1 : 0;
}

/** One draw from a categorical distribution given as a probability vector.
    Scans the cumulative sum; rounding shortfall falls to the last index. */
inline int categorical(Rng& rng, std::span<const double> probs) {
    if (probs.empty()) throw DomainError("categorical: empty probability vector");
    const double r = uniform01(rng);
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        cum += probs[i];
        if (r < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
}

/** FNV-1a 64-bit hash; used both for seed derivation and file provenance. */
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/** splitmix64 finalizer; decorrelates structured seed inputs. */
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/** Derives the seed for one stream element from a master seed, a stream
    label, and an index (typically an episode number).

    Parallel and serial execution of per-episode work agree because each
    episode's engine depends only on (master, label, index), never on how
    many draws earlier episodes consumed. */
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index) {
    return splitmix64(splitmix64(master ^ fnv1a64(label)) ^ index);
}

} // namespace pbql
