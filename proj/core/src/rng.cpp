#include "hpm/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hpm {
namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t Rng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
}

float Rng::next_float() {
    return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
}

float Rng::next_uniform(float lo, float hi) {
    if (!(lo < hi)) {
        throw std::invalid_argument("Rng::next_uniform: lo must be < hi");
    }
    return lo + next_float() * (hi - lo);
}

int Rng::next_int(int lo, int hi) {
    if (lo > hi) {
        throw std::invalid_argument("Rng::next_int: lo must be <= hi");
    }
    const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

float Rng::next_gaussian(float mean, float stddev) {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - static_cast<double>(next_float());
    const double u2 = static_cast<double>(next_float());
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return mean + stddev * static_cast<float>(r * std::cos(theta));
}

Rng Rng::child(std::string_view label) const {
    return Rng(mix64(seed_ ^ (fnv1a(label) + 0x9E3779B97F4A7C15ULL)));
}

}  // namespace hpm
