#ifndef SEMOFF_RNG_HPP
#define SEMOFF_RNG_HPP

#include <cstdint>
#include <random>

namespace semoff {

using Rng = std::mt19937_64;

/// Stream tags for seed fan-out. Every stochastic consumer draws from its own
/// stream, derived from the master seed and a (tag, index) pair.
enum class Stream : std::uint32_t {
    Environment = 1,
    Fading = 2,
    ActorInit = 3,
    CriticInit = 4,
    Sampling = 5,
    Minibatch = 6,
    DqnInit = 7,
    DqnExplore = 8,
    RandomPolicy = 9,
    Snapshot = 10,
};

/// Derives a 64-bit seed from (master, tag, index). std::seed_seq::generate is
/// fully specified by the standard, so the fan-out is portable.
inline std::uint64_t derive_seed(std::uint64_t master, Stream tag, std::uint64_t index = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Rng make_rng(std::uint64_t master, Stream tag, std::uint64_t index = 0)
{
    return Rng(derive_seed(master, tag, index));
}

} // namespace semoff

#endif // SEMOFF_RNG_HPP
