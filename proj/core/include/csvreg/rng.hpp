#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace csvreg {

// std::mt19937_64 output is fully specified by the standard; the std::*_distribution
// adaptors are not. All draws below are hand-rolled so that (seed -> stream) is
// bit-identical across compilers and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform index in [0, n). Rejection sampling keeps it unbiased.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<std::size_t>(x % bound);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller. Stateless (no cached spare) so the
    /// engine state alone determines the stream.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    void save(std::ostream& os) const { os << engine_; }
    void load(std::istream& is) { is >> engine_; }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed-splitting: derive(seed, a, b, ...) chains mix_seed so
/// sibling streams (batch sampler vs. penalty sampler vs. init) never collide.
inline std::uint64_t derive_seed(std::uint64_t seed) { return mix_seed(seed); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Rest... rest) {
    return derive_seed(mix_seed(seed ^ mix_seed(tag)), rest...);
}

// Stream tags used across the project.
namespace stream {
constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kUniformBatch = 2;
constexpr std::uint64_t kPenaltyBatch = 3;
constexpr std::uint64_t kData = 4;
constexpr std::uint64_t kTestData = 5;
}  // namespace stream

}  // namespace csvreg
