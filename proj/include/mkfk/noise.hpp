#pragma once

// Counter-based normal increments keyed by (seed, stream, particle, step).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mkfk {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    static Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Stream tags separating independent uses of one seed.
enum class Stream : std::uint32_t {
    increments = 0,
    initial = 1,
};

/// Deterministic noise: the value for a given (seed, replica, stream,
/// particle, index) never depends on scheduling or on other particles.
class NoiseSource {
public:
    NoiseSource() = default;
    explicit NoiseSource(std::uint64_t seed, std::uint32_t replica = 0) : seed_(seed), replica_(replica) {}

    std::uint64_t seed() const { return seed_; }
    std::uint32_t replica() const { return replica_; }
    NoiseSource with_replica(std::uint32_t r) const { return NoiseSource(seed_, r); }

    /// Two independent uniforms in (0, 1].
    std::array<double, 2> uniforms(Stream s, std::uint64_t particle, std::uint64_t index) const {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                      static_cast<std::uint32_t>(particle),
                                      static_cast<std::uint32_t>(particle >> 32) ^ (static_cast<std::uint32_t>(s) << 24) ^
                                          (replica_ << 4)};
        const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        const auto r = Philox4x32::generate(ctr, key);
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
        return {(static_cast<double>(a >> 11) + 1.0) * scale, (static_cast<double>(b >> 11) + 1.0) * scale};
    }

    /// Standard normal via Box-Muller (cosine branch).
    double normal(Stream s, std::uint64_t particle, std::uint64_t index) const {
        const auto u = uniforms(s, particle, index);
        return std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
    }

    /// Brownian increment driver for particle i at step k.
    double increment(std::uint64_t particle, std::uint64_t step) const {
        return normal(Stream::increments, particle, step);
    }

private:
    std::uint64_t seed_ = 0;
    std::uint32_t replica_ = 0;
};

} // namespace mkfk
