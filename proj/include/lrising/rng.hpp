#pragma once

// Reproducible RNG for the Monte Carlo chains: splitmix64, a counter-based
// 64-bit generator.  Chains derive independent streams from (seed, chain_id);
// the generator name is recorded in run manifests.

#include <cstdint>

namespace lrising {

inline constexpr const char* kRngName = "splitmix64";

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Stream derivation: decorrelates (seed, chain) pairs before counting.
    static Rng stream(std::uint64_t seed, std::uint64_t chain_id) {
        return Rng(mix64(seed + 0x9E3779B97F4A7C15ULL * (chain_id + 1)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    // uniform double in [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), n >= 1 (Lemire multiply-shift with rejection)
    std::uint64_t below(std::uint64_t n) {
        __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t thresh = (0 - n) % n;
            while (lo < thresh) {
                m = static_cast<__uint128_t>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    std::uint64_t state_;
};

}  // namespace lrising
