#pragma once

#include <cstdint>
#include <initializer_list>

namespace sxr {

// Counter-based deterministic RNG. A stream is identified by a seed plus a
// list of stream ids (e.g. {epoch, batch, sample}); the same identifiers
// always produce the same sequence, independent of call order elsewhere.
// Gaussians use an Irwin-Hall sum of 12 uniforms so every draw is exact
// binary arithmetic (no libm in the hot path).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ kGolden)) {}

    RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids)
        : state_(seed ^ kGolden) {
        for (std::uint64_t id : ids) state_ = mix(state_ + kGolden + id);
        state_ = mix(state_);
    }

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    // uniform in [0, 1), 53-bit resolution
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        return next_u64() % n;
    }

    // standard normal, Irwin-Hall(12): exact arithmetic, bounded to +-6
    double next_gauss() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += next_unit();
        return s - 6.0;
    }

    bool next_bool(double p_true) { return next_unit() < p_true; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    // SplitMix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace sxr
