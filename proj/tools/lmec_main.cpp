// Command-line front end: latency sweeps (bench), gradient verification
// (gradcheck) and the left/right product identity battery (equivalence).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmec/bench.hpp"
#include "lmec/gradcheck.hpp"
#include "lmec/rng.hpp"

namespace {

lmec::ActivationKind parse_activation(const std::string& name) {
    if (name == "relu") return lmec::ActivationKind::Relu;
    if (name == "sigmoid") return lmec::ActivationKind::Sigmoid;
    if (name == "tanh") return lmec::ActivationKind::TanhShift;
    if (name == "elu") return lmec::ActivationKind::EluPlusOne;
    throw CLI::ValidationError("--activation", "unknown activation: " + name);
}

lmec::PeKind parse_pe(const std::string& name) {
    if (name == "npe") return lmec::PeKind::Npe;
    if (name == "mrpe") return lmec::PeKind::MRpe;
    if (name == "mape") return lmec::PeKind::MApe;
    if (name == "lmape") return lmec::PeKind::LmApe;
    if (name == "arpe") return lmec::PeKind::ARpe;
    throw CLI::ValidationError("--variants", "unknown variant: " + name);
}

lmec::ProductOrder parse_order(const std::string& name) {
    if (name == "left") return lmec::ProductOrder::Left;
    if (name == "right") return lmec::ProductOrder::Right;
    if (name == "dynamic") return lmec::ProductOrder::Dynamic;
    throw CLI::ValidationError("--order", "unknown product order: " + name);
}

struct BenchOptions {
    std::string variants = "mrpe,lmape";
    std::string activation = "elu";
    std::string order = "dynamic";
    std::vector<std::size_t> seq_lens = {100, 250, 500, 1000, 2000};
    std::size_t dk = 64;
    std::size_t heads = 4;
    std::size_t batch = 4;
    std::size_t warmup = 50;
    std::size_t iters = 200;
    std::uint64_t seed = 0;
    std::string normalize = "on";
    std::string out = "bench.csv";
};

int run_bench(const BenchOptions& opt) {
    lmec::BenchConfig cfg;
    cfg.seq_lengths = opt.seq_lens;
    cfg.batch = opt.batch;
    cfg.warmup_iters = opt.warmup;
    cfg.measured_iters = opt.iters;
    cfg.seed = opt.seed;
    cfg.output_path = opt.out;

    std::size_t max_len = 0;
    for (std::size_t n : cfg.seq_lengths) max_len = std::max(max_len, n);

    lmec::Rng rng(opt.seed);
    std::stringstream names(opt.variants);
    std::string name;
    while (std::getline(names, name, ',')) {
        lmec::LinearAttentionSpec spec;
        spec.activation = parse_activation(opt.activation);
        spec.product_order = parse_order(opt.order);
        spec.normalize = opt.normalize == "on";
        spec.head_dim = opt.dk;
        spec.heads = opt.heads;
        switch (parse_pe(name)) {
            case lmec::PeKind::Npe:
                spec.pe = lmec::PositionEmbedding::npe();
                break;
            case lmec::PeKind::MRpe:
                spec.pe = lmec::PositionEmbedding::m_rpe(max_len);
                break;
            case lmec::PeKind::MApe:
                spec.pe = lmec::PositionEmbedding::m_ape(
                    max_len, rng.matrix_uniform(1, opt.dk, 0.5, 1.5));
                break;
            case lmec::PeKind::LmApe:
                spec.pe = lmec::PositionEmbedding::lm_ape(
                    lmec::LearnablePositionTable::uniform_init(max_len, opt.dk, rng));
                break;
            case lmec::PeKind::ARpe:
                spec.pe = lmec::PositionEmbedding::a_rpe(max_len);
                break;
        }
        cfg.variants.push_back(std::move(spec));
    }

    const std::vector<lmec::BenchRecord> records = lmec::run_latency_sweep(cfg);
    std::printf("%-14s %-8s %6s %8s %14s %14s\n", "variant", "order", "n", "d_k", "mean_s",
                "stddev_s");
    for (const lmec::BenchRecord& r : records) {
        std::printf("%-14s %-8s %6zu %8zu %14.6f %14.6f\n", r.variant.c_str(), r.order.c_str(),
                    r.n, r.d_k, r.mean_seconds, r.stddev_seconds);
    }
    std::printf("wrote %zu records to %s\n", records.size(), opt.out.c_str());
    return 0;
}

int run_gradcheck(std::uint64_t seed, const std::string& out) {
    const std::vector<lmec::GradReport> reports = lmec::run_all_gradient_checks(seed);
    std::ofstream file(out);
    if (!file) {
        std::cerr << "gradcheck: cannot write " << out << "\n";
        return 2;
    }
    file << lmec::kGradReportCsvHeader << "\n";
    std::size_t failures = 0;
    for (const lmec::GradReport& r : reports) {
        file << lmec::gradreport_csv_line(r) << "\n";
        if (r.max_rel_error >= lmec::kGradTolerance) {
            ++failures;
            std::printf("FAIL %s %s max_rel_error=%.3e at (%zu, %zu)\n", r.op_name.c_str(),
                        r.tensor_name.c_str(), r.max_rel_error, r.worst_row, r.worst_col);
        }
    }
    std::printf("gradcheck: %zu tensors checked, %zu over tolerance %.0e; wrote %s\n",
                reports.size(), failures, lmec::kGradTolerance, out.c_str());
    return failures == 0 ? 0 : 1;
}

int run_equivalence(std::uint64_t seed) {
    const std::vector<lmec::EquivalenceResult> results = lmec::run_equivalence_battery(
        seed, {1, 7, 64, 200}, {4, 64});
    std::size_t failures = 0;
    for (const lmec::EquivalenceResult& r : results) {
        const bool ok = r.max_rel_error < 1e-10;
        if (!ok) ++failures;
        std::printf("%s %-16s n=%-5zu d_k=%-3zu max_rel_error=%.3e\n", ok ? "PASS" : "FAIL",
                    r.label.c_str(), r.n, r.d_k, r.max_rel_error);
    }
    std::printf("equivalence: %zu combinations, %zu failures\n", results.size(), failures);
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernelized linear attention microbenchmark and verification suite"};
    app.require_subcommand(1);

    BenchOptions bench_opt;
    CLI::App* bench = app.add_subcommand("bench", "latency sweep over sequence lengths");
    bench->add_option("--variants", bench_opt.variants,
                      "comma list: npe,mrpe,mape,lmape,arpe");
    bench->add_option("--activation", bench_opt.activation, "relu|sigmoid|tanh|elu");
    bench->add_option("--order", bench_opt.order, "left|right|dynamic");
    bench->add_option("--seq-lens", bench_opt.seq_lens, "sequence lengths")->delimiter(',');
    bench->add_option("--dk", bench_opt.dk, "per-head dimension");
    bench->add_option("--heads", bench_opt.heads, "attention heads");
    bench->add_option("--batch", bench_opt.batch, "independent sequences per pass");
    bench->add_option("--warmup", bench_opt.warmup, "unmeasured passes");
    bench->add_option("--iters", bench_opt.iters, "measured passes");
    bench->add_option("--seed", bench_opt.seed, "input seed");
    bench->add_option("--normalize", bench_opt.normalize, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    bench->add_option("--out", bench_opt.out, "output CSV path");

    std::uint64_t grad_seed = 0;
    std::string grad_out = "gradcheck.csv";
    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    grad->add_option("--seed", grad_seed, "seed");
    grad->add_option("--out", grad_out, "output CSV path");

    std::uint64_t eq_seed = 0;
    CLI::App* equiv = app.add_subcommand("equivalence", "left vs right product identity");
    equiv->add_option("--seed", eq_seed, "seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) return run_bench(bench_opt);
        if (grad->parsed()) return run_gradcheck(grad_seed, grad_out);
        if (equiv->parsed()) return run_equivalence(eq_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
