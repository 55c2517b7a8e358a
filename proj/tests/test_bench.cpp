#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "lmec/bench.hpp"
#include "lmec/rng.hpp"

using lmec::BenchConfig;
using lmec::BenchRecord;
using lmec::LinearAttentionSpec;
using lmec::PeKind;
using lmec::ProductOrder;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/lmec_bench_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

LinearAttentionSpec bench_variant(PeKind pe_kind, std::size_t d_k, std::size_t max_len,
                                  ProductOrder order, std::uint64_t seed) {
    lmec::Rng rng(seed);
    LinearAttentionSpec spec;
    spec.activation = lmec::ActivationKind::EluPlusOne;
    spec.product_order = order;
    spec.head_dim = d_k;
    spec.heads = 1;
    switch (pe_kind) {
        case PeKind::Npe:
            spec.pe = lmec::PositionEmbedding::npe();
            break;
        case PeKind::MRpe:
            spec.pe = lmec::PositionEmbedding::m_rpe(max_len);
            break;
        case PeKind::MApe:
            spec.pe = lmec::PositionEmbedding::m_ape(max_len,
                                                     rng.matrix_uniform(1, d_k, 0.3, 1.3));
            break;
        case PeKind::LmApe:
            spec.pe = lmec::PositionEmbedding::lm_ape(
                lmec::LearnablePositionTable::uniform_init(max_len, d_k, rng));
            break;
        case PeKind::ARpe:
            spec.pe = lmec::PositionEmbedding::a_rpe(max_len);
            break;
    }
    return spec;
}

}  // namespace

TEST_SUITE_BEGIN("bench");

TEST_CASE("one variant at one length yields exactly one record") {
    BenchConfig cfg;
    cfg.variants = {bench_variant(PeKind::LmApe, 8, 128, ProductOrder::Right, 1)};
    cfg.seq_lengths = {100};
    cfg.batch = 1;
    cfg.warmup_iters = 1;
    cfg.measured_iters = 3;
    const auto records = lmec::run_latency_sweep(cfg);
    REQUIRE(records.size() == 1);
    CHECK(records[0].n == 100);
    CHECK(records[0].mean_seconds > 0.0);
    CHECK(records[0].stddev_seconds >= 0.0);
}

TEST_CASE("dynamic variants record the dispatch rule's order") {
    BenchConfig cfg;
    cfg.variants = {bench_variant(PeKind::Npe, 16, 0, ProductOrder::Dynamic, 2)};
    cfg.seq_lengths = {8, 16, 17, 64};
    cfg.batch = 1;
    cfg.warmup_iters = 0;
    cfg.measured_iters = 1;
    const auto records = lmec::run_latency_sweep(cfg);
    REQUIRE(records.size() == 4);
    CHECK(records[0].order == "left");
    CHECK(records[1].order == "left");  // tie resolves left
    CHECK(records[2].order == "right");
    CHECK(records[3].order == "right");
}

TEST_CASE("flop estimates grow strictly with sequence length") {
    BenchConfig cfg;
    cfg.variants = {bench_variant(PeKind::MRpe, 8, 256, ProductOrder::Left, 3)};
    cfg.seq_lengths = {16, 32, 64, 128, 256};
    cfg.batch = 1;
    cfg.warmup_iters = 0;
    cfg.measured_iters = 1;
    const auto records = lmec::run_latency_sweep(cfg);
    for (std::size_t i = 1; i < records.size(); ++i) {
        CHECK(records[i].flop_estimate > records[i - 1].flop_estimate);
    }
}

TEST_CASE("sequence lengths beyond a variant's max length are rejected up front") {
    BenchConfig cfg;
    cfg.variants = {bench_variant(PeKind::MRpe, 8, 64, ProductOrder::Left, 4)};
    cfg.seq_lengths = {32, 65};
    CHECK_THROWS_AS(lmec::run_latency_sweep(cfg), std::invalid_argument);
}

TEST_CASE("unwritable output paths are rejected before timing") {
    BenchConfig cfg;
    cfg.variants = {bench_variant(PeKind::Npe, 8, 0, ProductOrder::Left, 5)};
    cfg.seq_lengths = {16};
    cfg.output_path = "/nonexistent_dir/out.csv";
    CHECK_THROWS_AS(lmec::run_latency_sweep(cfg), std::invalid_argument);
}

TEST_CASE("csv round trip reconstructs the records") {
    TempFile f("roundtrip.csv");
    std::vector<BenchRecord> records(2);
    records[0] = {"lmape-elu", "lmape", "right", 2000, 64, 4, 0.123456789, 0.000123456, 123456789};
    records[1] = {"mrpe-elu", "mrpe", "left", 100, 64, 4, 1.000000001, 0.0, 42};
    lmec::emit_csv(records, f.path);
    const auto parsed = lmec::parse_csv(f.path);
    REQUIRE(parsed.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(parsed[i].variant == records[i].variant);
        CHECK(parsed[i].pe == records[i].pe);
        CHECK(parsed[i].order == records[i].order);
        CHECK(parsed[i].n == records[i].n);
        CHECK(parsed[i].d_k == records[i].d_k);
        CHECK(parsed[i].heads == records[i].heads);
        CHECK(parsed[i].mean_seconds == doctest::Approx(records[i].mean_seconds).epsilon(1e-9));
        CHECK(parsed[i].stddev_seconds ==
              doctest::Approx(records[i].stddev_seconds).epsilon(1e-9));
        CHECK(parsed[i].flop_estimate == records[i].flop_estimate);
    }
}

TEST_CASE("a single record emits a two-line file") {
    TempFile f("two_lines.csv");
    lmec::emit_csv({{"npe-elu", "npe", "left", 10, 4, 1, 0.5, 0.1, 99}}, f.path);
    std::ifstream in(f.path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++lines;
    }
    CHECK(lines == 2);
}

TEST_CASE("an empty record list is rejected") {
    CHECK_THROWS_AS(lmec::emit_csv({}, "/tmp/lmec_bench_empty.csv"), std::invalid_argument);
}

TEST_CASE("a crossover point exists on a sweep spanning the head dimension") {
    const std::size_t d_k = 16;
    BenchConfig cfg;
    cfg.variants = {bench_variant(PeKind::Npe, d_k, 0, ProductOrder::Left, 6),
                    bench_variant(PeKind::Npe, d_k, 0, ProductOrder::Right, 6)};
    cfg.seq_lengths = {4, 8, 16, 64, 256, 1024};
    cfg.batch = 1;
    cfg.warmup_iters = 2;
    cfg.measured_iters = 5;
    const auto records = lmec::run_latency_sweep(cfg);
    const std::size_t points = cfg.seq_lengths.size();
    // smallest N* with right <= left for every tested N >= N*, allowing one
    // noise inversion
    bool found = false;
    for (std::size_t start = 0; start < points && !found; ++start) {
        std::size_t inversions = 0;
        for (std::size_t i = start; i < points; ++i) {
            if (records[points + i].mean_seconds > records[i].mean_seconds) ++inversions;
        }
        found = inversions <= 1;
    }
    CHECK(found);
    // and the asymptotic end is unambiguous
    CHECK(records[2 * points - 1].mean_seconds < records[points - 1].mean_seconds);
}

TEST_CASE("equivalence battery reports tiny errors on a small grid") {
    const auto results = lmec::run_equivalence_battery(7, {1, 7, 33}, {4}, 2);
    CHECK(results.size() == 4 * 5 * 3);
    for (const auto& r : results) {
        INFO(r.label << " n=" << r.n);
        CHECK(r.max_rel_error < 1e-10);
    }
}

TEST_SUITE_END();
