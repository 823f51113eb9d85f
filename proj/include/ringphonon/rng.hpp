#pragma once

#include <cmath>
#include <cstdint>

#include "ringphonon/numerics.hpp"

// Counter-based random numbers: every draw is a pure hash of
// (seed, stream, i, j), so noise is reproducible regardless of generation
// order and identical across runs.

namespace ringphonon {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t i,
                                  std::uint64_t j, std::uint64_t lane)
{
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ i);
    h = splitmix64(h ^ j);
    return splitmix64(h ^ lane);
}

/// Uniform double in (0, 1] from 53 bits of a hash.
inline double uniform_from_bits(std::uint64_t h)
{
    return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal deviate addressed by (seed, stream, i, j); Box-Muller on
/// two independent counter hashes.
inline double gaussian_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t i,
                          std::uint64_t j)
{
    const double u1 = uniform_from_bits(counter_hash(seed, stream, i, j, 0));
    const double u2 = uniform_from_bits(counter_hash(seed, stream, i, j, 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

}  // namespace ringphonon
