#pragma once

#include <cstdint>
#include <random>

namespace amr {

using Rng = std::mt19937_64;

// Independent named streams derived from one experiment seed, so that e.g.
// replay sampling never shifts the new-task batch order.
enum class Stream : std::uint32_t {
    Init = 1,
    Data = 2,
    Batches = 3,
    Replay = 4,
    Probe = 5,
    Removal = 6,
    Oracle = 7,
};

inline Rng make_rng(std::uint64_t seed, std::uint32_t stream, std::uint32_t substream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, substream,
                      0x9E3779B9u};
    return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint32_t substream = 0) {
    return make_rng(seed, static_cast<std::uint32_t>(stream), substream);
}

}  // namespace amr
