#pragma once

#include <cstdint>
#include <random>

namespace vitxray {

// Seeded RNG threaded through every stochastic operation. uniform01 avoids
// std::uniform_real_distribution so draws are identical across stdlib versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform01() { return (engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // uniform in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }

    std::mt19937_64& engine() { return engine_; }

    // stateless mix for deriving per-item seeds (splitmix64 finalizer)
    static std::uint64_t derive(std::uint64_t base, std::uint64_t index) {
        std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace vitxray
