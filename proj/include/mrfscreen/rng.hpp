#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mrfscreen {

// splitmix64, used to expand seeds into full states.
inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic counter-seeded RNG stream (xoshiro256++).
///
/// Streams are addressed by (seed, stream_id): the same pair always yields
/// the same sequence, so per-site / per-chain / per-replication streams are
/// reproducible independently of scheduling.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (stream_id + 1));
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard exponential via inversion; used where speed is uncritical.
    double exponential() {
        double u;
        do { u = uniform01(); } while (u <= 0.0);
        return -std::log(u);
    }

    /// Standard normal (Box-Muller, uncached).
    double normal() {
        double u1, u2;
        do { u1 = uniform01(); } while (u1 <= 0.0);
        u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> state_{};
};

/// Ziggurat sampler for the standard exponential distribution.
/// Avoids a log() on the common path; the Metropolis inner loops consume
/// billions of these.
///
/// Layer i in [1,255] is the rectangle [0, x_[i]] x [exp(-x_[i]), exp(-x_[i+1])]
/// with x_[1] = r the widest finite layer; layer 0 is the base strip
/// (rectangle of width r plus the tail beyond r), sampled via a virtual
/// width x_[0] = v * exp(r). All layers have area v.
class ZigguratExp {
public:
    ZigguratExp() {
        const double r = 7.69711747013104972;
        const double v = 3.9496598225815571993e-3;
        x_[0] = v * std::exp(r);
        x_[1] = r;
        for (int i = 2; i <= 255; ++i)
            x_[i] = -std::log(v / x_[i - 1] + std::exp(-x_[i - 1]));
        x_[256] = 0.0;
        for (int i = 1; i <= 255; ++i) y_[i] = std::exp(-x_[i]);
        y_[0] = y_[1];
        y_[256] = 1.0;
        for (int i = 0; i <= 255; ++i) ratio_[i] = x_[i + 1] / x_[i];
    }

    double draw(RngStream& rng) const {
        for (;;) {
            const std::uint64_t bits = rng.next_u64();
            const int i = static_cast<int>(bits & 255);
            const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
            if (__builtin_expect(u < ratio_[i], 1)) return u * x_[i];
            if (i == 0) return x_[1] + rng.exponential();  // tail: r + Exp(1)
            const double x = u * x_[i];
            const double fx = std::exp(-x);
            if (y_[i] + rng.uniform01() * (y_[i + 1] - y_[i]) < fx) return x;
        }
    }

private:
    double x_[257];
    double y_[257];
    double ratio_[256];
};

inline const ZigguratExp& ziggurat_exp() {
    static const ZigguratExp z;
    return z;
}

}  // namespace mrfscreen
