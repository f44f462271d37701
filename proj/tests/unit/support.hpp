#pragma once

#include "npw/core.hpp"

#include <cstdint>
#include <random>

namespace npw::prop {

/// Seeded generator of points and vectors for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    Vec box(int m, double lo, double hi) {
        Vec v(m);
        for (int i = 0; i < m; ++i) v(i) = uniform(lo, hi);
        return v;
    }
    /// Point of the upper half-plane with y in [ylo, yhi].
    Vec half_plane(double ylo = 0.2, double yhi = 3.0) {
        return make_vec({uniform(-2.0, 2.0), uniform(ylo, yhi)});
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace npw::prop
