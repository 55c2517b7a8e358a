#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "lmec/rng.hpp"
#include "lmec/serialization.hpp"

using lmec::Matrix;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/lmec_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE_BEGIN("serialization");

TEST_CASE("tensor round trip is bit exact") {
    TempFile f("roundtrip.bin");
    lmec::Rng rng(1);
    const Matrix a = rng.matrix_uniform(7, 3, -5.0, 5.0);
    const Matrix b = rng.matrix_uniform(1, 9, -5.0, 5.0);
    lmec::save_tensors(f.path, {&a, &b});
    const auto loaded = lmec::load_tensors(f.path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].same_shape(a));
    CHECK(loaded[1].same_shape(b));
    CHECK(lmec::max_abs_diff(loaded[0], a) == 0.0);
    CHECK(lmec::max_abs_diff(loaded[1], b) == 0.0);
}

TEST_CASE("bad magic is rejected") {
    TempFile f("badmagic.bin");
    std::ofstream out(f.path, std::ios::binary);
    out << "NOPE" << std::string(64, '\0');
    out.close();
    CHECK_THROWS_WITH_AS(lmec::load_tensors(f.path), doctest::Contains("magic"),
                         std::runtime_error);
}

TEST_CASE("truncated file is rejected") {
    TempFile f("truncated.bin");
    lmec::Rng rng(2);
    const Matrix a = rng.matrix_uniform(4, 4, -1.0, 1.0);
    lmec::save_tensors(f.path, {&a});
    // chop off the tail of the payload
    std::ifstream in(f.path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
    out.close();
    CHECK_THROWS_AS(lmec::load_tensors(f.path), std::runtime_error);
}

TEST_CASE("block parameters round trip through the file format") {
    TempFile f("block.bin");
    lmec::Rng rng(3);
    lmec::BlockConfig cfg;
    cfg.model_dim = 8;
    cfg.heads = 2;
    cfg.h_ffn = 12;
    cfg.max_len = 32;
    lmec::BlockParams saved = lmec::make_block_params(cfg, rng);
    lmec::save_block(f.path, saved);

    lmec::BlockParams target = lmec::make_block_params(cfg, rng);  // different values
    lmec::load_block_into(f.path, target);
    const auto a = saved.tensors();
    const auto b = target.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(lmec::max_abs_diff(*a[i], *b[i]) == 0.0);
    }

    // identical parameters must give identical forwards
    const Matrix x = rng.matrix_uniform(5, cfg.model_dim, -1.0, 1.0);
    CHECK(lmec::max_abs_diff(lmec::lmec_block_forward(x, saved),
                             lmec::lmec_block_forward(x, target)) == 0.0);
}

TEST_CASE("shape drift is rejected on load") {
    TempFile f("drift.bin");
    lmec::Rng rng(4);
    lmec::BlockConfig small;
    small.model_dim = 8;
    small.heads = 2;
    small.h_ffn = 12;
    small.max_len = 32;
    const lmec::BlockParams saved = lmec::make_block_params(small, rng);
    lmec::save_block(f.path, saved);

    lmec::BlockConfig big = small;
    big.h_ffn = 18;
    lmec::BlockParams target = lmec::make_block_params(big, rng);
    CHECK_THROWS_AS(lmec::load_block_into(f.path, target), std::runtime_error);
}

TEST_SUITE_END();
