#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace elldet {

/// Counter-based splittable generator ("splitmix64-ctr/1").
///
/// Output n of stream (seed, tag) is
///     finalize(key + (n+1) * 0x9E3779B97F4A7C15)
/// with key = finalize(seed ^ finalize(tag)) and finalize the SplitMix64
/// mixing function. Streams are split by deriving a new tag; replays are
/// portable because the whole algorithm fits in this comment.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t tag) : key_(mix(seed ^ mix(tag))) {}

    static constexpr std::string_view algorithm() { return "splitmix64-ctr/1"; }

    std::uint64_t next_u64() {
        ++ctr_;
        return mix(key_ + ctr_ * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Modulus log-uniform in [lo, hi], phase uniform.
    std::complex<double> sample_annulus(double lo, double hi) {
        double m = std::exp(uniform(std::log(lo), std::log(hi)));
        double ph = uniform(0.0, 2.0 * std::numbers::pi);
        return std::polar(m, ph);
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Derive the tag of a task-local stream from mixed integers.
    static std::uint64_t stream_tag(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                                    std::uint64_t d = 0) {
        return mix(a + mix(b + mix(c + mix(d))));
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace elldet
