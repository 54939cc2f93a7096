#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace labcvar {

/**
 * Self-contained deterministic random generator: xoshiro256** seeded through
 * splitmix64. The integer stream is defined purely by 64-bit arithmetic, so
 * the same seed yields the same stream on every platform and build; the
 * floating-point variates additionally go through exp/log/sqrt/cos from libm.
 * Platform generators are deliberately not used anywhere in this library,
 * since their streams are unspecified and vary across standard libraries.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53 random bits.
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via the Box-Muller transform; variates are produced
    /// in pairs and the second is cached, so consumption order is fixed.
    double normal();

    /// Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t bounded(std::uint64_t n);

    /// In-place Fisher-Yates shuffle driven by bounded().
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::array<std::uint64_t, 4> state_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/**
 * Derives an independent sub-seed from (seed, stream) with one splitmix64
 * step. Used to give dataset sampling, parameter initialization and batch
 * shuffling their own streams for a single experiment seed.
 */
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace labcvar
