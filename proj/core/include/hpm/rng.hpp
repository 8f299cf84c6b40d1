#pragma once

#include <cstdint>
#include <string_view>

namespace hpm {

/// Deterministic 64-bit generator (splitmix64). The same seed produces the
/// same sequence on every platform; child streams are derived from the
/// original seed and a label, so reproducibility does not depend on how many
/// values the parent has already drawn.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 24 bits of mantissa.
    float next_float();

    /// Uniform in [lo, hi). Requires lo < hi.
    float next_uniform(float lo, float hi);

    /// Uniform integer in [lo, hi] inclusive. Requires lo <= hi.
    int next_int(int lo, int hi);

    /// Gaussian via Box-Muller; consumes two uniforms per call.
    float next_gaussian(float mean, float stddev);

    /// Independent stream keyed by (original seed, label).
    Rng child(std::string_view label) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace hpm
