#pragma once

#include <cstdint>
#include <limits>

namespace mprtree {

// Counter-based 64-bit generator (splitmix64). Trivial jump-ahead and cheap
// substream derivation make replications provably independent given one
// master seed.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static SplitMix64 substream(std::uint64_t master_seed, std::uint64_t stream_index) {
        std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL * (stream_index + 1);
        z = mix(z);
        z = mix(z + 0xBF58476D1CE4E5B9ULL);
        return SplitMix64(z);
    }

    result_type operator()() { return mix(state_ += 0x9E3779B97F4A7C15ULL); }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    double uniform01() { return double((*this)() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    std::int64_t poisson(double mean);

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

} // namespace mprtree
