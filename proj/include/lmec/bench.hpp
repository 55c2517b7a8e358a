#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmec/attention.hpp"

namespace lmec {

struct BenchConfig {
    std::vector<LinearAttentionSpec> variants;
    std::vector<std::size_t> seq_lengths;
    std::size_t batch = 4;
    std::size_t warmup_iters = 50;
    std::size_t measured_iters = 200;
    std::uint64_t seed = 0;
    std::string output_path;  // empty: records returned only
};

// One timing observation: a variant at one sequence length. Times are
// per measured iteration (one pass over the whole batch, all heads);
// flop_estimate counts the same unit of work.
struct BenchRecord {
    std::string variant;
    std::string pe;
    std::string order;
    std::size_t n = 0;
    std::size_t d_k = 0;
    std::size_t heads = 0;
    double mean_seconds = 0.0;
    double stddev_seconds = 0.0;
    std::uint64_t flop_estimate = 0;
};

inline constexpr const char* kBenchCsvHeader = "variant,pe,order,n,d_k,heads,mean_s,stddev_s,flops";

std::string variant_label(const LinearAttentionSpec& spec);

// For each (variant, N): seeded random inputs, warmup passes, then timed
// passes on a single execution lane. Rejects N beyond a variant's max length
// and unwritable output paths before any timing runs.
std::vector<BenchRecord> run_latency_sweep(const BenchConfig& cfg);

void emit_csv(const std::vector<BenchRecord>& records, const std::string& path);
std::vector<BenchRecord> parse_csv(const std::string& path);

// Left vs right product agreement over the full activation x PE grid,
// exposed as a user-runnable command.
struct EquivalenceResult {
    std::string label;
    std::size_t n = 0;
    std::size_t d_k = 0;
    double max_rel_error = 0.0;
};
std::vector<EquivalenceResult> run_equivalence_battery(
    std::uint64_t seed, const std::vector<std::size_t>& seq_lengths,
    const std::vector<std::size_t>& head_dims, std::size_t seeds_per_combo = 3);

}  // namespace lmec
