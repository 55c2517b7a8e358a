#include "lmec/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lmec/rng.hpp"

namespace lmec {

std::string variant_label(const LinearAttentionSpec& spec) {
    return std::string(pe_name(spec.pe.kind)) + "-" + activation_name(spec.activation);
}

namespace {

void validate_config(const BenchConfig& cfg) {
    if (cfg.variants.empty()) throw std::invalid_argument("bench: no variants");
    if (cfg.seq_lengths.empty()) throw std::invalid_argument("bench: no sequence lengths");
    if (cfg.measured_iters < 1) throw std::invalid_argument("bench: measured_iters must be >= 1");
    if (cfg.batch < 1) throw std::invalid_argument("bench: batch must be >= 1");
    for (const LinearAttentionSpec& spec : cfg.variants) {
        if (spec.pe.kind == PeKind::Npe) continue;
        for (std::size_t n : cfg.seq_lengths) {
            if (n > spec.pe.max_len) {
                throw std::invalid_argument("bench: sequence length " + std::to_string(n) +
                                            " exceeds max length " +
                                            std::to_string(spec.pe.max_len) + " of variant " +
                                            variant_label(spec));
            }
        }
    }
    if (!cfg.output_path.empty()) {
        std::ofstream probe(cfg.output_path, std::ios::app);
        if (!probe) {
            throw std::invalid_argument("bench: output path not writable: " + cfg.output_path);
        }
    }
}

struct TimingStats {
    double mean = 0.0;
    double stddev = 0.0;
    double median = 0.0;  // kept internally as an outlier guard
};

TimingStats summarize(std::vector<double> samples) {
    TimingStats s;
    const double n = static_cast<double>(samples.size());
    for (double v : samples) s.mean += v;
    s.mean /= n;
    for (double v : samples) s.stddev += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(s.stddev / n);
    std::sort(samples.begin(), samples.end());
    s.median = samples[samples.size() / 2];
    return s;
}

}  // namespace

std::vector<BenchRecord> run_latency_sweep(const BenchConfig& cfg) {
    validate_config(cfg);
    std::vector<BenchRecord> records;
    for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) {
        const LinearAttentionSpec& spec = cfg.variants[vi];
        for (std::size_t n : cfg.seq_lengths) {
            Rng rng(cfg.seed ^ (0x9e37 * (vi + 1)) ^ (0xc2b2 * n));
            std::vector<Matrix> qs, ks, vs;
            for (std::size_t b = 0; b < cfg.batch; ++b) {
                qs.push_back(rng.matrix_uniform(n, spec.head_dim, -1.0, 1.0));
                ks.push_back(rng.matrix_uniform(n, spec.head_dim, -1.0, 1.0));
                vs.push_back(rng.matrix_uniform(n, spec.head_dim, -1.0, 1.0));
            }
            LinearAttentionSpec run_spec = spec;
            run_spec.heads = 1;  // per-head core; the heads count multiplies passes

            auto one_pass = [&] {
                double sink = 0.0;
                for (std::size_t b = 0; b < cfg.batch; ++b) {
                    for (std::size_t h = 0; h < spec.heads; ++h) {
                        const AttentionOutput out =
                            attention_forward(qs[b], ks[b], vs[b], run_spec);
                        sink += out.values(0, 0);
                    }
                }
                return sink;
            };

            double guard = 0.0;
            for (std::size_t w = 0; w < cfg.warmup_iters; ++w) guard += one_pass();
            std::vector<double> samples(cfg.measured_iters);
            for (std::size_t it = 0; it < cfg.measured_iters; ++it) {
                const auto start = std::chrono::steady_clock::now();
                guard += one_pass();
                const auto stop = std::chrono::steady_clock::now();
                samples[it] = std::chrono::duration<double>(stop - start).count();
            }
            if (!std::isfinite(guard)) throw std::runtime_error("bench: non-finite outputs");

            const TimingStats stats = summarize(std::move(samples));
            const ProductOrder resolved = dynamic_dispatch(spec, n);
            BenchRecord rec;
            rec.variant = variant_label(spec);
            rec.pe = pe_name(spec.pe.kind);
            rec.order = order_name(resolved);
            rec.n = n;
            rec.d_k = spec.head_dim;
            rec.heads = spec.heads;
            rec.mean_seconds = stats.mean;
            rec.stddev_seconds = stats.stddev;
            rec.flop_estimate = linear_attention_flops(spec.pe.kind, resolved, n, spec.head_dim,
                                                       spec.head_dim, spec.normalize) *
                                spec.heads * cfg.batch;
            records.push_back(std::move(rec));
        }
    }
    if (!cfg.output_path.empty()) emit_csv(records, cfg.output_path);
    return records;
}

void emit_csv(const std::vector<BenchRecord>& records, const std::string& path) {
    if (records.empty()) throw std::invalid_argument("emit_csv: no records");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_csv: cannot write " + path);
    out << kBenchCsvHeader << "\n";
    char buf[64];
    for (const BenchRecord& r : records) {
        out << r.variant << "," << r.pe << "," << r.order << "," << r.n << "," << r.d_k << ","
            << r.heads << ",";
        std::snprintf(buf, sizeof(buf), "%.9f,%.9f", r.mean_seconds, r.stddev_seconds);
        out << buf << "," << r.flop_estimate << "\n";
    }
    if (!out) throw std::runtime_error("emit_csv: write failed for " + path);
}

std::vector<BenchRecord> parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kBenchCsvHeader) {
        throw std::runtime_error("parse_csv: bad header in " + path);
    }
    std::vector<BenchRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        BenchRecord r;
        auto next = [&]() -> std::string {
            if (!std::getline(ss, field, ',')) {
                throw std::runtime_error("parse_csv: short row in " + path);
            }
            return field;
        };
        r.variant = next();
        r.pe = next();
        r.order = next();
        r.n = std::stoull(next());
        r.d_k = std::stoull(next());
        r.heads = std::stoull(next());
        r.mean_seconds = std::stod(next());
        r.stddev_seconds = std::stod(next());
        r.flop_estimate = std::stoull(next());
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<EquivalenceResult> run_equivalence_battery(
    std::uint64_t seed, const std::vector<std::size_t>& seq_lengths,
    const std::vector<std::size_t>& head_dims, std::size_t seeds_per_combo) {
    constexpr ActivationKind kActivations[] = {ActivationKind::Relu, ActivationKind::Sigmoid,
                                               ActivationKind::TanhShift,
                                               ActivationKind::EluPlusOne};
    constexpr PeKind kPeKinds[] = {PeKind::Npe, PeKind::MRpe, PeKind::MApe, PeKind::LmApe,
                                   PeKind::ARpe};
    const std::size_t max_len = *std::max_element(seq_lengths.begin(), seq_lengths.end());

    std::vector<EquivalenceResult> results;
    for (ActivationKind activation : kActivations) {
        for (PeKind pe_kind : kPeKinds) {
            for (std::size_t d_k : head_dims) {
                for (std::size_t n : seq_lengths) {
                    EquivalenceResult res;
                    res.label = std::string(pe_name(pe_kind)) + "-" + activation_name(activation);
                    res.n = n;
                    res.d_k = d_k;
                    for (std::size_t s = 0; s < seeds_per_combo; ++s) {
                        Rng rng(seed + 0x51ed * s + 0x9e * n + d_k);
                        LinearAttentionSpec spec;
                        spec.activation = activation;
                        spec.head_dim = d_k;
                        spec.heads = 1;
                        // Relu rows can be all-zero on mixed-sign input;
                        // that is a spec'd rejection, not an identity failure.
                        spec.normalize = activation != ActivationKind::Relu;
                        switch (pe_kind) {
                            case PeKind::Npe:
                                spec.pe = PositionEmbedding::npe();
                                break;
                            case PeKind::MRpe:
                                spec.pe = PositionEmbedding::m_rpe(max_len);
                                break;
                            case PeKind::MApe:
                                spec.pe = PositionEmbedding::m_ape(
                                    max_len, rng.matrix_uniform(1, d_k, -1.0, 1.0));
                                break;
                            case PeKind::LmApe:
                                spec.pe = PositionEmbedding::lm_ape(
                                    LearnablePositionTable::uniform_init(max_len, d_k, rng));
                                break;
                            case PeKind::ARpe:
                                spec.pe = PositionEmbedding::a_rpe(max_len);
                                break;
                        }
                        const Matrix q = rng.matrix_uniform(n, d_k, -1.0, 1.0);
                        const Matrix k = rng.matrix_uniform(n, d_k, -1.0, 1.0);
                        const Matrix v = rng.matrix_uniform(n, d_k, -1.0, 1.0);
                        spec.product_order = ProductOrder::Left;
                        const Matrix left = attention_forward(q, k, v, spec).values;
                        spec.product_order = ProductOrder::Right;
                        const Matrix right = attention_forward(q, k, v, spec).values;
                        res.max_rel_error = std::max(res.max_rel_error,
                                                     relative_error(right, left));
                    }
                    results.push_back(std::move(res));
                }
            }
        }
    }
    return results;
}

}  // namespace lmec
