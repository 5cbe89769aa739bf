#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hetsq {

using Rng = std::mt19937_64;

// Independent sub-streams of one replication.
enum class Stream : std::uint64_t {
    Population = 1,
    Arrival = 2,
    Service = 3,
    Patience = 4,
    Routing = 5,
    Diffusion = 6,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based derivation: (master, replication, stream) -> seed. Distinct
// triples give statistically unrelated streams; the mapping is a pure function.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication,
                                    Stream stream) noexcept {
    return mix64(mix64(mix64(master) ^ replication) + static_cast<std::uint64_t>(stream));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t replication, Stream stream) {
    return Rng(derive_seed(master, replication, stream));
}

// Uniform on the open interval (0,1); never returns 0 so log() is safe.
inline double uniform_open(Rng& rng) {
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    return (static_cast<double>(rng() >> 11) + 0.5) * scale;
}

inline double exponential(Rng& rng, double rate) { return -std::log(uniform_open(rng)) / rate; }

}  // namespace hetsq
