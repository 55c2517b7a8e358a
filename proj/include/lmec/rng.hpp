#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "lmec/matrix.hpp"

namespace lmec {

// Counter-based deterministic generator (splitmix64). The state is just the
// seed plus a counter increment, so equal seeds give bit-identical draw
// sequences across runs and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two uniform draws per value.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Matrix matrix_uniform(std::size_t rows, std::size_t cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (double& v : m.values()) v = uniform(lo, hi);
        return m;
    }

    Matrix matrix_normal(std::size_t rows, std::size_t cols, double stddev = 1.0) {
        Matrix m(rows, cols);
        for (double& v : m.values()) v = stddev * normal();
        return m;
    }

private:
    std::uint64_t state_;
};

}  // namespace lmec
