#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <utility>

namespace quanto::rng {

/// Philox4x32-10 counter-based block cipher (Salmon et al., Random123).
/// Output is a pure function of (key, counter); no state is shared between
/// draws, so any partition of the counter space across workers yields the
/// same numbers.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derives an independent seed for a named consumer of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return splitmix64(master ^ splitmix64(h));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) noexcept {
    return splitmix64(derive_seed(master, tag) + splitmix64(index));
}

/// Maps the top 53 bits to (0,1]; never returns 0 so log() is safe.
inline double to_unit_open_closed(std::uint64_t bits) noexcept {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Maps the top 52 bits to (0,1); the half-ulp offset keeps both ends exact.
inline double to_unit_open(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Draws addressed by (seed, stream, step, block). Each block yields two
/// 64-bit words, i.e. one pair of standard normals.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    std::pair<std::uint64_t, std::uint64_t> bits(std::uint64_t stream, std::uint32_t step,
                                                 std::uint32_t block) const noexcept {
        const auto out = Philox4x32::block(
            {static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), step, block}, key_);
        return {(std::uint64_t{out[0]} << 32) | out[1], (std::uint64_t{out[2]} << 32) | out[3]};
    }

    /// Box-Muller pair for factor indices (2*block, 2*block+1).
    std::pair<double, double> normals(std::uint64_t stream, std::uint32_t step, std::uint32_t block) const noexcept {
        const auto [a, b] = bits(stream, step, block);
        const double radius = std::sqrt(-2.0 * std::log(to_unit_open_closed(a)));
        const double angle = 2.0 * M_PI * to_unit_open(b);
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    std::pair<double, double> uniforms(std::uint64_t stream, std::uint32_t step, std::uint32_t block) const noexcept {
        const auto [a, b] = bits(stream, step, block);
        return {to_unit_open(a), to_unit_open(b)};
    }

private:
    Philox4x32::Key key_;
};

/// UniformRandomBitGenerator over one (seed, stream, step) address, walking
/// the block index. Lets std distributions consume a private substream.
class SubstreamEngine {
public:
    using result_type = std::uint64_t;

    SubstreamEngine(const CounterRng& rng, std::uint64_t stream, std::uint32_t step,
                    std::uint32_t first_block = 0) noexcept
        : rng_(rng), stream_(stream), step_(step), block_(first_block) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (!have_second_) {
            const auto [a, b] = rng_.bits(stream_, step_, block_++);
            second_ = b;
            have_second_ = true;
            return a;
        }
        have_second_ = false;
        return second_;
    }

private:
    const CounterRng& rng_;
    std::uint64_t stream_;
    std::uint32_t step_;
    std::uint32_t block_;
    std::uint64_t second_ = 0;
    bool have_second_ = false;
};

/// Unbiased-enough index in [0, n) from 64 random bits (multiply-high).
inline std::size_t index_below(std::uint64_t bits, std::size_t n) noexcept {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(bits) * n) >> 64);
}

}  // namespace quanto::rng
