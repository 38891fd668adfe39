#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "ghost/geometry.hpp"

// Deterministic random source.
//
// All stochastic code in the library draws from Rng so that a single seed
// reproduces a whole run bit-for-bit.  Distribution transforms (uniform,
// normal) are implemented here rather than with std::<distribution> types
// because the standard leaves those algorithms unspecified; this keeps the
// byte streams identical across standard libraries.
//
// Independent consumers derive child generators with stream(): the child's
// seed mixes the parent seed with a label hash, so adding a new consumer
// (or reordering existing ones) never perturbs the draws of the others.

namespace ghost {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : seed_(seed), gen_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    // Child generator for the named consumer.  Deterministic in (seed, name)
    // only — independent of how much the parent has drawn.
    Rng stream(std::string_view name) const {
        return Rng(detail::splitmix64(seed_ ^ detail::fnv1a64(name)));
    }

    // Child generator keyed by an integer (frame index, trial number, ...).
    Rng stream(std::string_view name, std::uint64_t index) const {
        return Rng(detail::splitmix64(seed_ ^ detail::fnv1a64(name) ^
                                      detail::splitmix64(index + 1)));
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on [lo, hi] inclusive, rejection-sampled for exactness.
    std::uint64_t uniform_index(std::uint64_t n) { // [0, n)
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // Standard normal via Box-Muller (two uniforms per call, nothing cached).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    Eigen::Vector3d unit_vector() {
        // Marsaglia: uniform on the sphere.
        for (;;) {
            const double x = uniform(-1.0, 1.0);
            const double y = uniform(-1.0, 1.0);
            const double s = x * x + y * y;
            if (s >= 1.0 || s == 0.0) continue;
            const double r = 2.0 * std::sqrt(1.0 - s);
            return {x * r, y * r, 1.0 - 2.0 * s};
        }
    }

    // Uniform over SO(3) (Shoemake subgroup algorithm).
    Eigen::Quaterniond rotation() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double u3 = uniform();
        const double a = std::sqrt(1.0 - u1);
        const double b = std::sqrt(u1);
        return Eigen::Quaterniond(a * std::sin(2.0 * kPi * u2), a * std::cos(2.0 * kPi * u2),
                                  b * std::sin(2.0 * kPi * u3), b * std::cos(2.0 * kPi * u3))
            .normalized();
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace ghost
