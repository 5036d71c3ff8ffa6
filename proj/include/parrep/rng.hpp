#pragma once

// Counter-based random streams. Every trajectory owns a stream identified by
// (master seed, 64-bit stream id); streams never share counter space, so the
// noise a trajectory sees does not depend on how work is scheduled.

#include <array>
#include <cstdint>
#include <limits>
#include <span>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace parrep {

// Philox4x32-10 (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Order-sensitive combination used to derive child stream ids.
inline std::uint64_t mix_stream(std::uint64_t parent, std::uint64_t child) noexcept
{
    return splitmix64(parent ^ splitmix64(child + 0x632be59bd9b4e019ULL));
}

// UniformRandomBitGenerator over a Philox block sequence. The key comes from
// the master seed, the upper half of the counter is the stream id and the
// lower half counts blocks.
class PhiloxEngine {
public:
    using result_type = std::uint64_t;

    PhiloxEngine() : PhiloxEngine(0, 0) {}
    PhiloxEngine(std::uint64_t master_seed, std::uint64_t stream_id) noexcept;

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        if (pos_ == 2) refill();
        return buf_[pos_++];
    }

    std::uint64_t stream_id() const noexcept { return stream_; }
    std::uint64_t blocks_used() const noexcept { return block_; }

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t stream_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buf_{};
    int pos_ = 2;
};

// Identifies a stream lineage: children are derived deterministically so a
// whole experiment is reproducible from one master seed.
struct StreamSeed {
    std::uint64_t master = 0;
    std::uint64_t path = 0;

    StreamSeed child(std::uint64_t index) const noexcept { return {master, mix_stream(path, index)}; }
};

class NoiseStream {
public:
    NoiseStream() = default;
    explicit NoiseStream(StreamSeed seed) : engine_(seed.master, seed.path) {}
    NoiseStream(std::uint64_t master_seed, std::uint64_t stream_id) : engine_(master_seed, stream_id) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    void fill_normal(std::span<double> out)
    {
        for (double& v : out) v = normal_(engine_);
    }

    // Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);

    PhiloxEngine& engine() noexcept { return engine_; }

private:
    PhiloxEngine engine_;
    boost::random::normal_distribution<double> normal_;
    boost::random::uniform_01<double> uniform_;
};

} // namespace parrep
