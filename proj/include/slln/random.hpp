#pragma once

#include <cstdint>
#include <random>

namespace slln {

/// Engine used everywhere. mt19937_64 output is fixed by the standard, so a
/// seed reproduces the same stream on every conforming implementation.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Splittable counter scheme: a task id is hashed into the master stream.
///
///   derive_seed(m, t) = splitmix64(splitmix64(m) ^ splitmix64(t + 0x632BE59BD9B4E019))
///
/// Nested task paths fold left, so derive_seed(m, a, b) == derive_seed(derive_seed(m, a), b).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t task) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(task + 0x632BE59BD9B4E019ULL));
}

template <class... Tasks>
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t task, Tasks... rest) noexcept {
    return derive_seed(derive_seed(master, task), static_cast<std::uint64_t>(rest)...);
}

/// Uniform on the open interval (0,1), 53 random bits. Hand-rolled because
/// std::uniform_real_distribution is not bit-identical across standard libraries.
inline double uniform01(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline int rademacher(Rng& rng) { return (rng() >> 63) != 0 ? 1 : -1; }

}  // namespace slln
