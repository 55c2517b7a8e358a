#include <doctest.h>

#include <cmath>

#include "lmec/rng.hpp"

TEST_SUITE_BEGIN("rng");

TEST_CASE("equal seeds give bit-identical matrices") {
    lmec::Rng a(42);
    lmec::Rng b(42);
    const lmec::Matrix ma = a.matrix_uniform(16, 16, -1.0, 1.0);
    const lmec::Matrix mb = b.matrix_uniform(16, 16, -1.0, 1.0);
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK(ma.values()[i] == mb.values()[i]);
    }
}

TEST_CASE("different seeds diverge") {
    lmec::Rng a(1);
    lmec::Rng b(2);
    bool any_diff = false;
    for (int i = 0; i < 8; ++i) any_diff |= a.next_u64() != b.next_u64();
    CHECK(any_diff);
}

TEST_CASE("uniform draws respect bounds") {
    lmec::Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-2.0, 3.0);
        CHECK(v >= -2.0);
        CHECK(v < 3.0);
    }
}

TEST_CASE("normal draws have roughly standard moments") {
    lmec::Rng rng(9);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_SUITE_END();
