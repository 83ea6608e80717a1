#pragma once

// Portable pseudo-random stream.
//
// Seeding: the 64-bit seed is expanded by splitmix64 into the four words of a
// xoshiro256** state. Uniform doubles take the top 53 bits of the output.
// Every sampling decision in the library goes through uniform() and the
// inverse-CDF scan in sample_index(), so a port that reproduces those two
// functions reproduces the sampled indices exactly.

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace marl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive an independent seed for a sub-stream (agent, trial, time step...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    return splitmix64(s);
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Index drawn from unnormalized nonnegative weights by a linear
    /// inverse-CDF scan; `total` must equal the sum of the weights.
    std::size_t sample_index(std::span<const double> weights, double total) {
        const double u = uniform() * total;
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (weights[k] <= 0.0) continue;
            acc += weights[k];
            last_positive = k;
            if (u < acc) return k;
        }
        // rounding left u at or beyond the accumulated total
        return last_positive;
    }

    std::size_t sample_index(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        return sample_index(weights, total);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

} // namespace marl
