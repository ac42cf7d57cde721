#pragma once

#include <cstdint>
#include <random>

#include "snrflow/types.hpp"

namespace snrflow {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seeded random source. Independent sub-streams are derived with stream(),
/// so parallel consumers never share generator state.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed)
        : seed_(seed), engine_(splitmix64(seed)) {}

    double gaussian() { return normal_(engine_); }

    /// Uniform on [0, 1).
    double uniform() { return unif_(engine_); }

    /// Uniform on the open interval (0, 1); never returns an endpoint.
    double uniform_open() {
        return (static_cast<double>(engine_()) + 0.5) * 0x1p-64;
    }

    std::uint64_t raw() { return engine_(); }

    /// Derived stream with decorrelated seed. Deterministic in (seed, salt).
    RandomSource stream(std::uint64_t salt) const {
        return RandomSource(splitmix64(seed_ ^ splitmix64(salt + 0x51ED2701)));
    }

    std::uint64_t seed() const { return seed_; }

    VectorXd gaussian_vector(Eigen::Index n) {
        VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian();
        return v;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace snrflow
