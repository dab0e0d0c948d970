#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace rosgas {

/// Derives an independent stream seed from a base seed and a tag, so that
/// subsystems (generator, agents, folds, ...) never share an RNG stream.
inline uint64_t derive_seed(uint64_t base, uint64_t tag) {
    // splitmix64 finalizer over the combined value
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return derive_seed(base, h);
}

/// Seeded random source. All randomness in the library flows through one of
/// these so that every run is a pure function of its seed.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    int poisson(double mean) { return std::poisson_distribution<int>(mean)(engine_); }

    bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

    /// Samples an index in [0, weights.size()) proportionally to weights.
    int categorical(const std::vector<double>& weights) {
        return std::discrete_distribution<int>(weights.begin(), weights.end())(engine_);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace rosgas
