// Acceptance suite: one check per release criterion, one PASS/FAIL line each.
// Exit code is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lmec/bench.hpp"
#include "lmec/blocks.hpp"
#include "lmec/gradcheck.hpp"
#include "lmec/rng.hpp"
#include "oracles.hpp"

using lmec::ActivationKind;
using lmec::Matrix;
using lmec::PeKind;
using lmec::ProductOrder;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s - %s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// --- criterion 1: left/right product identity over the full variant grid ---
void criterion_product_order_identity() {
    const auto start = std::chrono::steady_clock::now();
    const auto results =
        lmec::run_equivalence_battery(20260810, {1, 7, 64, 200, 1000}, {4, 64}, 3);
    double worst = 0.0;
    std::string worst_label;
    for (const auto& r : results) {
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_label = r.label + " n=" + std::to_string(r.n) +
                          " d_k=" + std::to_string(r.d_k);
        }
    }
    const double secs = elapsed_seconds(start);
    const bool ok = worst < 1e-10 && secs < 60.0;
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "%zu combination points, worst rel error %.3e (%s), %.1fs (limit 60s)",
                  results.size(), worst, worst_label.c_str(), secs);
    report(1, "product-order identity, 20 variants", ok, detail);
}

// --- criterion 2: two-term decomposition reconstructs the direct similarity ---
void criterion_cosformer_decomposition() {
    lmec::Rng rng(99);
    double worst = 0.0;
    for (std::size_t n : {std::size_t{4}, std::size_t{16}, std::size_t{32}}) {
        const std::size_t m = 2 * n;
        const Matrix qp = lmec::apply_activation(ActivationKind::EluPlusOne,
                                                 rng.matrix_uniform(n, 6, -1.0, 1.0));
        const Matrix kp = lmec::apply_activation(ActivationKind::EluPlusOne,
                                                 rng.matrix_uniform(n, 6, -1.0, 1.0));
        const auto pv = lmec::cosformer_phase_vectors(m, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double kernel = oracle::row_dot(qp, i, kp, j);
                const double direct = kernel * oracle::relative_cos(i, j, m);
                const double decomposed = kernel * (pv.cos_weights[i] * pv.cos_weights[j] +
                                                    pv.sin_weights[i] * pv.sin_weights[j]);
                worst = std::max(worst, std::abs(direct - decomposed) /
                                            std::max(std::abs(direct), 1e-30));
            }
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "worst rel error %.3e over N in {4,16,32}", worst);
    report(2, "cosformer cos/sin decomposition", worst < 1e-12, detail);
}

// --- criterion 3: every learnable tensor passes finite-difference checks ---
void criterion_gradient_verification() {
    const auto reports = lmec::run_all_gradient_checks(20260810);
    double worst = 0.0;
    std::string worst_label;
    std::size_t failures = 0;
    for (const auto& r : reports) {
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_label = r.op_name + "/" + r.tensor_name;
        }
        if (r.max_rel_error >= lmec::kGradTolerance) ++failures;
    }
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "%zu tensors over 3 seeds, %zu over tolerance, worst rel error %.3e (%s)",
                  reports.size(), failures, worst, worst_label.c_str());
    report(3, "gradient verification at 1e-6", failures == 0, detail);
}

// --- criterion 4: GLU parameter parity at the published widths ---
void criterion_glu_parity() {
    const std::size_t h_o = 256, h_ffn = 2048;
    const std::size_t h_glu = lmec::glu_hidden_dim(h_ffn);
    const std::size_t ffn_weights = 2 * h_o * h_ffn;
    const std::size_t glu_weights = 3 * h_o * h_glu;
    const double gap = std::abs(static_cast<double>(ffn_weights) -
                                static_cast<double>(glu_weights)) /
                       static_cast<double>(ffn_weights);
    const bool ok =
        h_glu == 1365 && ffn_weights == 1048576 && glu_weights == 1048320 && gap < 0.001;
    char detail[160];
    std::snprintf(detail, sizeof(detail), "ffn %zu vs glu %zu weights, gap %.4f%% (limit 0.1%%)",
                  ffn_weights, glu_weights, 100.0 * gap);
    report(4, "GLU/FFN parameter parity", ok, detail);
}

// --- criterion 5: latency crossover and the one-term speed advantage ---
void criterion_latency() {
    const auto start = std::chrono::steady_clock::now();
    lmec::Rng rng(1234);
    const std::size_t d_k = 64, heads = 4, max_len = 2048;
    const std::vector<std::size_t> sweep = {100, 250, 500, 1000, 2000};

    auto make_variant = [&](PeKind pe_kind, ProductOrder order) {
        lmec::LinearAttentionSpec spec;
        spec.activation = ActivationKind::EluPlusOne;
        spec.product_order = order;
        spec.head_dim = d_k;
        spec.heads = heads;
        if (pe_kind == PeKind::MRpe) {
            spec.pe = lmec::PositionEmbedding::m_rpe(max_len);
        } else {
            spec.pe = lmec::PositionEmbedding::lm_ape(
                lmec::LearnablePositionTable::uniform_init(max_len, d_k, rng));
        }
        return spec;
    };

    lmec::BenchConfig cfg;
    cfg.variants = {make_variant(PeKind::MRpe, ProductOrder::Left),
                    make_variant(PeKind::MRpe, ProductOrder::Right),
                    make_variant(PeKind::LmApe, ProductOrder::Left),
                    make_variant(PeKind::LmApe, ProductOrder::Right)};
    // Iteration counts trimmed against the spec's CLI default so the whole
    // criterion keeps inside its stated runtime budget; assertions unchanged.
    cfg.batch = 1;
    cfg.warmup_iters = 3;
    cfg.measured_iters = 21;
    cfg.seed = 77;
    cfg.seq_lengths = sweep;
    const auto records = lmec::run_latency_sweep(cfg);
    for (const auto& r : records) {
        std::printf("    %-12s %-6s n=%-5zu mean=%.6fs stddev=%.6fs\n", r.variant.c_str(),
                    r.order.c_str(), r.n, r.mean_seconds, r.stddev_seconds);
    }

    auto find = [&](std::size_t variant_index, std::size_t n) -> const lmec::BenchRecord& {
        return records[variant_index * sweep.size() +
                       static_cast<std::size_t>(
                           std::find(sweep.begin(), sweep.end(), n) - sweep.begin())];
    };

    // (a) right product at N=2000 at least 2x faster than left
    const double mrpe_ratio = find(0, 2000).mean_seconds / find(1, 2000).mean_seconds;
    const double lmape_ratio = find(2, 2000).mean_seconds / find(3, 2000).mean_seconds;
    const bool crossover_ok = mrpe_ratio >= 2.0 && lmape_ratio >= 2.0;

    // (b) the one-term variant beats the two-term variant: margin beyond
    // timing noise at N=2000 in both orders, mean ordering from N=500 up
    bool lmla_faster = true;
    for (std::size_t vi : {std::size_t{0}, std::size_t{1}}) {  // 0: left pair, 1: right pair
        const auto& mrpe_big = find(vi, 2000);
        const auto& lmape_big = find(vi + 2, 2000);
        const double margin = mrpe_big.mean_seconds - lmape_big.mean_seconds;
        const double noise = mrpe_big.stddev_seconds + lmape_big.stddev_seconds;
        if (margin <= noise) lmla_faster = false;
        for (std::size_t n : sweep) {
            if (n >= 500 && find(vi + 2, n).mean_seconds >= find(vi, n).mean_seconds) {
                lmla_faster = false;
            }
        }
    }

    // (c) per-doubling growth of the left product exceeds the right product's
    bool growth_ok = true;
    for (std::size_t vi : {std::size_t{0}, std::size_t{2}}) {
        const double left_growth = find(vi, 2000).mean_seconds / find(vi, 1000).mean_seconds;
        const double right_growth =
            find(vi + 1, 2000).mean_seconds / find(vi + 1, 1000).mean_seconds;
        if (left_growth <= right_growth) growth_ok = false;
        const double left_growth2 = find(vi, 1000).mean_seconds / find(vi, 500).mean_seconds;
        const double right_growth2 =
            find(vi + 1, 1000).mean_seconds / find(vi + 1, 500).mean_seconds;
        if (left_growth2 <= right_growth2) growth_ok = false;
    }

    const double secs = elapsed_seconds(start);
    const bool ok = crossover_ok && lmla_faster && growth_ok && secs < 600.0;
    char detail[320];
    std::snprintf(detail, sizeof(detail),
                  "L/R at N=2000: mrpe %.1fx, lmape %.1fx (need >=2); one-term faster: %s; "
                  "left grows faster: %s; %.0fs (limit 600s)",
                  mrpe_ratio, lmape_ratio, lmla_faster ? "yes" : "no", growth_ok ? "yes" : "no",
                  secs);
    report(5, "latency crossover and speed advantage", ok, detail);
}

// --- criterion 6: normalized outputs stay inside the value envelope ---
void criterion_convexity() {
    lmec::Rng seed_rng(555);
    std::size_t checked = 0;
    bool ok = true;
    constexpr PeKind kPe[] = {PeKind::Npe, PeKind::MRpe, PeKind::MApe, PeKind::LmApe,
                              PeKind::ARpe};
    constexpr ActivationKind kAct[] = {ActivationKind::Sigmoid, ActivationKind::TanhShift,
                                       ActivationKind::EluPlusOne};
    while (checked < 100) {
        for (PeKind pe_kind : kPe) {
            for (ActivationKind activation : kAct) {
                if (checked >= 100) break;
                lmec::Rng rng(seed_rng.next_u64());
                const std::size_t n = 6 + checked % 7, d = 3 + checked % 4, m = 32;
                lmec::LinearAttentionSpec spec;
                spec.activation = activation;
                spec.head_dim = d;
                spec.normalize = true;
                switch (pe_kind) {
                    case PeKind::Npe:
                        spec.pe = lmec::PositionEmbedding::npe();
                        break;
                    case PeKind::MRpe:
                        spec.pe = lmec::PositionEmbedding::m_rpe(m);
                        break;
                    case PeKind::MApe:
                        // non-negative extension keeps the kernel non-negative
                        spec.pe = lmec::PositionEmbedding::m_ape(
                            m, rng.matrix_uniform(1, d, 0.0, 1.5));
                        break;
                    case PeKind::LmApe:
                        spec.pe = lmec::PositionEmbedding::lm_ape(
                            lmec::LearnablePositionTable::uniform_init(m, d, rng));
                        break;
                    case PeKind::ARpe:
                        spec.pe = lmec::PositionEmbedding::a_rpe(m);
                        break;
                }
                const Matrix q = rng.matrix_uniform(n, d, -1.0, 1.0);
                const Matrix k = rng.matrix_uniform(n, d, -1.0, 1.0);
                const Matrix v = rng.matrix_uniform(n, d, -1.0, 1.0);
                const Matrix out = lmec::attention_forward(q, k, v, spec).values;
                for (std::size_t c = 0; c < d; ++c) {
                    double lo = v(0, c), hi = v(0, c);
                    for (std::size_t j = 1; j < n; ++j) {
                        lo = std::min(lo, v(j, c));
                        hi = std::max(hi, v(j, c));
                    }
                    for (std::size_t i = 0; i < n; ++i) {
                        if (out(i, c) < lo - 1e-12 || out(i, c) > hi + 1e-12) ok = false;
                    }
                }
                ++checked;
            }
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "%zu random instances within the [min, max] envelope",
                  checked);
    report(6, "normalization keeps outputs in the value hull", ok, detail);
}

// --- criterion 7: the published block configuration composes and stacks ---
void criterion_block_composition() {
    lmec::Rng rng(31337);
    lmec::BlockConfig cfg;  // model 256, heads 4, h_ffn 2048, conv width 15
    cfg.max_len = 256;
    bool ok = true;
    std::string note;

    // residual identity under zero-initialized output projections
    lmec::BlockParams zeroed = lmec::make_block_params(cfg, rng);
    auto& glu_pre = std::get<lmec::GluParams>(zeroed.ff_pre);
    glu_pre.w3 = Matrix(glu_pre.w3.rows(), glu_pre.w3.cols());
    glu_pre.b3 = Matrix(1, cfg.model_dim);
    auto& glu_post = std::get<lmec::GluParams>(zeroed.ff_post);
    glu_post.w3 = Matrix(glu_post.w3.rows(), glu_post.w3.cols());
    glu_post.b3 = Matrix(1, cfg.model_dim);
    zeroed.attn.w_o = Matrix(cfg.model_dim, cfg.model_dim);
    zeroed.conv.w_out = Matrix(cfg.model_dim, cfg.model_dim);
    zeroed.conv.b_out = Matrix(1, cfg.model_dim);
    const Matrix probe = rng.matrix_uniform(10, cfg.model_dim, -1.0, 1.0);
    if (lmec::max_abs_diff(lmec::lmec_block_forward(probe, zeroed),
                           lmec::layer_norm(probe, zeroed.ln_out)) != 0.0) {
        ok = false;
        note += "residual identity broken; ";
    }

    // a 12-layer stack at N=100 with finite outputs and stable shapes
    std::vector<lmec::BlockParams> stack;
    for (int layer = 0; layer < 12; ++layer) stack.push_back(lmec::make_block_params(cfg, rng));
    Matrix x = rng.matrix_uniform(100, cfg.model_dim, -1.0, 1.0);
    for (const auto& params : stack) {
        x = lmec::lmec_block_forward(x, params);
        if (x.rows() != 100 || x.cols() != cfg.model_dim || !x.all_finite()) {
            ok = false;
            note += "stack drifted; ";
            break;
        }
    }
    if (note.empty()) note = "12 layers, dim 256, kernel 15, N=100, finite outputs";
    report(7, "block composition", ok, note);
}

// --- criterion 8: positional sensitivity separates npe from lm-ape ---
void criterion_positional_sensitivity() {
    lmec::Rng rng(404);
    const std::size_t n = 9, d = 4, m = 16;
    const Matrix q = rng.matrix_uniform(n, d, -1.0, 1.0);
    const Matrix k = rng.matrix_uniform(n, d, -1.0, 1.0);
    const Matrix v = rng.matrix_uniform(n, d, -1.0, 1.0);
    auto permute = [&](const Matrix& mat) {
        Matrix p(mat.rows(), mat.cols());
        for (std::size_t i = 0; i < mat.rows(); ++i) {
            const std::size_t src = (i + 4) % mat.rows();
            for (std::size_t c = 0; c < mat.cols(); ++c) p(i, c) = mat(src, c);
        }
        return p;
    };

    lmec::LinearAttentionSpec npe;
    npe.activation = ActivationKind::EluPlusOne;
    npe.head_dim = d;
    npe.pe = lmec::PositionEmbedding::npe();
    const Matrix base = lmec::attention_forward(q, k, v, npe).values;
    const Matrix q_perm = lmec::attention_forward(permute(q), k, v, npe).values;
    const bool equivariant =
        lmec::max_abs_diff(q_perm, permute(base)) == 0.0 &&
        lmec::relative_error(lmec::attention_forward(q, permute(k), permute(v), npe).values,
                             base) < 1e-12;

    lmec::LinearAttentionSpec lm = npe;
    lm.pe = lmec::PositionEmbedding::lm_ape(
        lmec::LearnablePositionTable::uniform_init(m, d, rng));
    const Matrix lm_base = lmec::attention_forward(q, k, v, lm).values;
    const Matrix lm_perm = lmec::attention_forward(q, permute(k), permute(v), lm).values;
    const double sensitivity = lmec::max_abs_diff(lm_perm, lm_base);
    const bool sensitive = sensitivity > 1e-6;

    char detail[192];
    std::snprintf(detail, sizeof(detail),
                  "npe equivariant: %s; lm-ape output shift under permutation: %.3e",
                  equivariant ? "yes" : "no", sensitivity);
    report(8, "positional sensitivity", equivariant && sensitive, detail);
}

}  // namespace

int main() {
    criterion_product_order_identity();
    criterion_cosformer_decomposition();
    criterion_gradient_verification();
    criterion_glu_parity();
    criterion_latency();
    criterion_convexity();
    criterion_block_composition();
    criterion_positional_sensitivity();
    std::printf("%s: %d of 8 criteria failed\n", g_failures == 0 ? "PASS" : "FAIL", g_failures);
    return g_failures;
}
