#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace pelab {

namespace detail {

/// Philox4x32-10 block function (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

}  // namespace detail

/// Independent purposes drawn for the same path. Keeping them on separate
/// counters means the Brownian draws of a path do not move when the jump or
/// default specification changes.
enum class StreamChannel : std::uint32_t {
    brownian = 0,
    default_time = 1,
    jumps = 2,  // atom i uses jumps + i
    oracle = 0x8000'0000u,
};

/// Counter-based random stream keyed by (seed, path index, channel).
///
/// The counter block is (block, channel, path_lo, path_hi) and the key is the
/// 64-bit seed, so every stream is addressable without stepping any other one.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t path_index, std::uint32_t channel = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_{static_cast<std::uint32_t>(path_index), static_cast<std::uint32_t>(path_index >> 32)},
          channel_(channel) {}

    /// Next raw 64 bits.
    std::uint64_t next_u64() {
        if (lane_ == 2) {
            block_ = detail::philox4x32_10({block_index_, channel_, path_[0], path_[1]}, key_);
            ++block_index_;
            lane_ = 0;
        }
        const std::uint64_t hi = block_[2 * lane_];
        const std::uint64_t lo = block_[2 * lane_ + 1];
        ++lane_;
        return (hi << 32) | lo;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

    /// Uniform on (0, 1).
    double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53; }

    /// Standard normal by Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform_open()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Unit-rate exponential, strictly positive.
    double exponential() { return -std::log(uniform_open()); }

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> path_;
    std::uint32_t channel_;
    std::uint32_t block_index_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int lane_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream for one simulated path. Identical arguments give identical draws.
inline RandomStream derive_stream(std::uint64_t seed, std::uint64_t path_index,
                                  StreamChannel channel = StreamChannel::brownian) {
    return RandomStream(seed, path_index, static_cast<std::uint32_t>(channel));
}

inline RandomStream derive_stream(std::uint64_t seed, std::uint64_t path_index, std::uint32_t channel) {
    return RandomStream(seed, path_index, channel);
}

}  // namespace pelab
