#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace levylab {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is addressed by (key, stream id); the 128-bit counter is split into
/// a 64-bit position and the 64-bit stream id, so replica `i` of a run seeded
/// with `k` always sees the same numbers regardless of scheduling.
class Philox4x32 {
public:
    using result_type = std::uint64_t;

    Philox4x32(std::uint64_t key, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          stream_(stream) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (lane_ == 2) {
            block_ = generate(position_++);
            lane_ = 0;
        }
        const auto lo = static_cast<std::uint64_t>(block_[2 * lane_]);
        const auto hi = static_cast<std::uint64_t>(block_[2 * lane_ + 1]);
        ++lane_;
        return lo | (hi << 32);
    }

    /// Raw block for counter (position, stream); exposed for known-answer tests.
    std::array<std::uint32_t, 4> generate(std::uint64_t position) const noexcept {
        std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(position),
                                         static_cast<std::uint32_t>(position >> 32),
                                         static_cast<std::uint32_t>(stream_),
                                         static_cast<std::uint32_t>(stream_ >> 32)};
        return block(ctr, key_);
    }

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) noexcept {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    static std::array<std::uint32_t, 4> single_round(const std::array<std::uint32_t, 4>& c,
                                                     const std::array<std::uint32_t, 2>& k) noexcept {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int lane_ = 2;
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Per-scenario seed: splitmix64(run_seed XOR fnv1a64(scenario_id)).
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view label) noexcept {
    return splitmix64(run_seed ^ fnv1a64(label));
}

/// Uniform double in the open interval (0, 1) from the top 53 bits.
template <typename Engine>
double uniform_open01(Engine& engine) {
    const std::uint64_t bits = engine() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Standard normal variate by Box-Muller (one of the pair is discarded so
/// every call consumes exactly two uniforms).
template <typename Engine>
double standard_normal(Engine& engine) {
    const double u1 = uniform_open01(engine);
    const double u2 = uniform_open01(engine);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace levylab
