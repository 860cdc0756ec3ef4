#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace msj {

// Counter-based RNG streams (Philox4x32-10, Salmon et al. 2011).
//
// A stream is addressed by (key, stream_id). Draw i of stream s depends only
// on (key, s, i), so cohorts can be generated by a parallel map over subjects
// with results identical to the serial order, whatever the thread count.

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

class RngStream {
public:
    RngStream(std::uint64_t key, std::uint64_t stream_id)
        : key_(key), stream_(stream_id) {}

    std::uint64_t next_u64();

    // Uniform on [0, 1), 53 random bits.
    double next_double();

    // Uniform on (0, 1); never returns an endpoint, so log() stays finite.
    double next_double_open();

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    double exponential(double rate);

    std::uint64_t key() const { return key_; }
    std::uint64_t stream_id() const { return stream_; }
    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;  // block index
    std::uint64_t buffer_ = 0;
    bool buffered_ = false;
};

// Deterministic seed chaining for sub-experiments: each level folds one salt
// into the seed through the splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

}  // namespace msj
