#include "lmec/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace lmec {

const char* order_name(ProductOrder order) {
    switch (order) {
        case ProductOrder::Left: return "left";
        case ProductOrder::Right: return "right";
        case ProductOrder::Dynamic: return "dynamic";
    }
    return "?";
}

Matrix softmax_attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t d_k) {
    if (q.cols() != d_k || k.cols() != d_k) {
        throw std::invalid_argument("softmax_attention: q is " + shape_string(q) + ", k is " +
                                    shape_string(k) + ", expected width " + std::to_string(d_k));
    }
    if (k.rows() != v.rows()) {
        throw std::invalid_argument("softmax_attention: k is " + shape_string(k) + ", v is " +
                                    shape_string(v));
    }
    Matrix scores = matmul_transpose_b(q, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    for (double& s : scores.values()) s *= scale;
    return matmul(softmax_rows(scores), v);
}

namespace {

void check_terms(const std::vector<SimilarityTerm>& terms, const Matrix& v) {
    if (terms.empty()) {
        throw std::invalid_argument("terms attention: no similarity terms");
    }
    const std::size_t n_q = terms.front().q_side.rows();
    for (const SimilarityTerm& t : terms) {
        if (t.q_side.cols() != t.k_side.cols()) {
            throw std::invalid_argument("terms attention: term sides are " +
                                        shape_string(t.q_side) + " and " +
                                        shape_string(t.k_side));
        }
        if (t.q_side.rows() != n_q || t.k_side.rows() != v.rows()) {
            throw std::invalid_argument("terms attention: term rows " +
                                        shape_string(t.q_side) + " / " + shape_string(t.k_side) +
                                        " do not match v " + shape_string(v));
        }
    }
}

void divide_rows_checked(Matrix& out, const std::vector<double>& den) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
        if (den[i] == 0.0) {
            throw std::domain_error("linear attention: zero similarity row-sum at position " +
                                    std::to_string(i) + " (degenerate all-zero kernel row)");
        }
        const double inv = 1.0 / den[i];
        double* row = out.row_ptr(i);
        for (std::size_t j = 0; j < out.cols(); ++j) row[j] *= inv;
    }
}

Matrix accumulate(Matrix acc, const Matrix& inc) {
    for (std::size_t i = 0; i < acc.values().size(); ++i) acc.values()[i] += inc.values()[i];
    return acc;
}

}  // namespace

Matrix terms_attention_left(const std::vector<SimilarityTerm>& terms, const Matrix& v,
                            bool normalize) {
    check_terms(terms, v);
    Matrix sim = matmul_transpose_b(terms.front().q_side, terms.front().k_side);
    for (std::size_t t = 1; t < terms.size(); ++t) {
        sim = accumulate(std::move(sim), matmul_transpose_b(terms[t].q_side, terms[t].k_side));
    }
    Matrix out = matmul(sim, v);
    if (normalize) divide_rows_checked(out, row_sums(sim));
    return out;
}

Matrix terms_attention_right(const std::vector<SimilarityTerm>& terms, const Matrix& v,
                             bool normalize) {
    check_terms(terms, v);
    const std::size_t n_q = terms.front().q_side.rows();
    Matrix out(n_q, v.cols());
    std::vector<double> den(n_q, 0.0);
    for (const SimilarityTerm& t : terms) {
        const Matrix context = matmul_transpose_a(t.k_side, v);  // r x d_v
        out = accumulate(std::move(out), matmul(t.q_side, context));
        if (normalize) {
            const std::vector<double> key_mass = column_sums(t.k_side);  // k_side^T * ones
            for (std::size_t i = 0; i < n_q; ++i) {
                const double* qrow = t.q_side.row_ptr(i);
                double acc = 0.0;
                for (std::size_t c = 0; c < t.q_side.cols(); ++c) acc += qrow[c] * key_mass[c];
                den[i] += acc;
            }
        }
    }
    if (normalize) divide_rows_checked(out, den);
    return out;
}

Matrix linear_attention_left(const Matrix& q_prime, const Matrix& k_weighted, const Matrix& v,
                             bool normalize) {
    return terms_attention_left({{q_prime, k_weighted}}, v, normalize);
}

Matrix linear_attention_right(const Matrix& q_prime, const Matrix& k_weighted, const Matrix& v,
                              bool normalize) {
    return terms_attention_right({{q_prime, k_weighted}}, v, normalize);
}

ProductOrder dynamic_dispatch(const LinearAttentionSpec& spec, std::size_t n) {
    if (spec.product_order != ProductOrder::Dynamic) return spec.product_order;
    return n <= spec.head_dim ? ProductOrder::Left : ProductOrder::Right;
}

std::uint64_t linear_attention_flops(PeKind kind, ProductOrder order, std::size_t n,
                                     std::size_t d_k, std::size_t d_v, bool normalize) {
    const std::uint64_t un = n, uk = d_k, uv = d_v;
    const std::uint64_t terms = kind == PeKind::MRpe ? 2 : kind == PeKind::ARpe ? 3 : 1;
    std::uint64_t reweight = 0;
    if (kind == PeKind::MApe || kind == PeKind::LmApe) reweight = un * uk;
    if (kind == PeKind::MRpe) reweight = 4 * un * uk;
    const std::uint64_t per_term =
        order == ProductOrder::Left ? un * un * (uk + uv) : 2 * un * uk * uv;
    std::uint64_t norm = 0;
    if (normalize) norm = order == ProductOrder::Left ? un * un : 2 * un * uk * terms;
    return reweight + terms * per_term + norm;
}

namespace {

void check_qkv(const Matrix& q, const Matrix& k, const Matrix& v,
               const LinearAttentionSpec& spec, const char* op) {
    if (q.cols() != spec.head_dim || k.cols() != spec.head_dim) {
        throw std::invalid_argument(std::string(op) + ": q is " + shape_string(q) + ", k is " +
                                    shape_string(k) + ", spec head_dim is " +
                                    std::to_string(spec.head_dim));
    }
    if (k.rows() != v.rows()) {
        throw std::invalid_argument(std::string(op) + ": k is " + shape_string(k) + ", v is " +
                                    shape_string(v));
    }
}

AttentionOutput run_terms(const std::vector<SimilarityTerm>& terms, const Matrix& v,
                          const LinearAttentionSpec& spec, std::size_t n_q, std::size_t n_k) {
    const ProductOrder resolved = dynamic_dispatch(spec, std::max(n_q, n_k));
    AttentionOutput out;
    out.resolved_order = resolved;
    out.values = resolved == ProductOrder::Left ? terms_attention_left(terms, v, spec.normalize)
                                                : terms_attention_right(terms, v, spec.normalize);
    out.flop_estimate = linear_attention_flops(spec.pe.kind, resolved, std::max(n_q, n_k),
                                               spec.head_dim, v.cols(), spec.normalize);
    return out;
}

}  // namespace

std::vector<SimilarityTerm> build_similarity_terms(const Matrix& q, const Matrix& k,
                                                   const LinearAttentionSpec& spec) {
    const Matrix q_prime = apply_activation(spec.activation, q);
    const Matrix k_prime = apply_activation(spec.activation, k);

    switch (spec.pe.kind) {
        case PeKind::Npe:
            return {{q_prime, k_prime}};
        case PeKind::MRpe: {
            const PhaseVectors pq = cosformer_phase_vectors(spec.pe.max_len, q.rows());
            const PhaseVectors pk = cosformer_phase_vectors(spec.pe.max_len, k.rows());
            std::vector<SimilarityTerm> terms;
            terms.push_back({scale_rows(q_prime, pq.cos_weights),
                             scale_rows(k_prime, pk.cos_weights)});
            terms.push_back({scale_rows(q_prime, pq.sin_weights),
                             scale_rows(k_prime, pk.sin_weights)});
            return terms;
        }
        case PeKind::MApe: {
            if (spec.pe.extension.cols() != k.cols()) {
                throw std::invalid_argument("m-ape attention: extension is " +
                                            shape_string(spec.pe.extension) + ", k is " +
                                            shape_string(k));
            }
            const Matrix weights = m_ape_weights(spec.pe.max_len, k.rows(), spec.pe.extension);
            return {{q_prime, elementwise(k_prime, weights, BinaryOp::Mul)}};
        }
        case PeKind::LmApe: {
            const Matrix weights = lm_ape_weights(spec.pe.table, k.rows());
            if (weights.cols() == 1 && k.cols() > 1) {
                // Scalar per-position angle, broadcast across the head width.
                std::vector<double> per_row(weights.rows());
                for (std::size_t j = 0; j < weights.rows(); ++j) per_row[j] = weights(j, 0);
                return {{q_prime, scale_rows(k_prime, per_row)}};
            }
            if (weights.cols() != k.cols()) {
                throw std::invalid_argument("lm-ape attention: table width " +
                                            std::to_string(weights.cols()) + ", k is " +
                                            shape_string(k));
            }
            return {{q_prime, elementwise(k_prime, weights, BinaryOp::Mul)}};
        }
        case PeKind::ARpe: {
            const PhaseVectors pq = cosformer_phase_vectors(spec.pe.max_len, q.rows());
            const PhaseVectors pk = cosformer_phase_vectors(spec.pe.max_len, k.rows());
            auto as_column = [](const std::vector<double>& vals) {
                Matrix m(vals.size(), 1);
                for (std::size_t i = 0; i < vals.size(); ++i) m(i, 0) = vals[i];
                return m;
            };
            std::vector<SimilarityTerm> terms;
            terms.push_back({q_prime, k_prime});
            terms.push_back({as_column(pq.cos_weights), as_column(pk.cos_weights)});
            terms.push_back({as_column(pq.sin_weights), as_column(pk.sin_weights)});
            return terms;
        }
    }
    throw std::invalid_argument("build_similarity_terms: bad pe kind");
}

AttentionOutput cosformer_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                    const LinearAttentionSpec& spec) {
    if (spec.pe.kind != PeKind::MRpe) {
        throw std::invalid_argument("cosformer_attention: spec.pe must be m-rpe");
    }
    check_qkv(q, k, v, spec, "cosformer_attention");
    return run_terms(build_similarity_terms(q, k, spec), v, spec, q.rows(), k.rows());
}

AttentionOutput lmla_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                               const LinearAttentionSpec& spec) {
    if (spec.pe.kind != PeKind::LmApe && spec.pe.kind != PeKind::MApe &&
        spec.pe.kind != PeKind::Npe) {
        throw std::invalid_argument("lmla_attention: spec.pe must be lm-ape, m-ape or npe");
    }
    check_qkv(q, k, v, spec, "lmla_attention");
    return run_terms(build_similarity_terms(q, k, spec), v, spec, q.rows(), k.rows());
}

AttentionOutput a_rpe_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const LinearAttentionSpec& spec) {
    if (spec.pe.kind != PeKind::ARpe) {
        throw std::invalid_argument("a_rpe_attention: spec.pe must be a-rpe");
    }
    check_qkv(q, k, v, spec, "a_rpe_attention");
    return run_terms(build_similarity_terms(q, k, spec), v, spec, q.rows(), k.rows());
}

AttentionOutput attention_forward(const Matrix& q, const Matrix& k, const Matrix& v,
                                  const LinearAttentionSpec& spec) {
    switch (spec.pe.kind) {
        case PeKind::MRpe:
            return cosformer_attention(q, k, v, spec);
        case PeKind::ARpe:
            return a_rpe_attention(q, k, v, spec);
        case PeKind::Npe:
        case PeKind::MApe:
        case PeKind::LmApe:
            return lmla_attention(q, k, v, spec);
    }
    throw std::invalid_argument("attention_forward: bad pe kind");
}

PositionEmbedding slice_head_pe(const PositionEmbedding& pe, std::size_t head,
                                std::size_t head_dim, std::size_t heads) {
    switch (pe.kind) {
        case PeKind::Npe:
        case PeKind::MRpe:
        case PeKind::ARpe:
            return pe;
        case PeKind::MApe: {
            if (pe.extension.cols() != head_dim * heads) {
                throw std::invalid_argument("slice_head_pe: extension is " +
                                            shape_string(pe.extension) + ", expected 1x" +
                                            std::to_string(head_dim * heads));
            }
            return PositionEmbedding::m_ape(pe.max_len,
                                            slice_cols(pe.extension, head * head_dim, head_dim));
        }
        case PeKind::LmApe: {
            if (pe.table.dim() == 1) return pe;  // scalar table shared across heads
            if (pe.table.dim() != head_dim * heads) {
                throw std::invalid_argument("slice_head_pe: table is " +
                                            shape_string(pe.table.radians()) +
                                            ", expected width " +
                                            std::to_string(head_dim * heads));
            }
            return PositionEmbedding::lm_ape(LearnablePositionTable::from_parts(
                slice_cols(pe.table.radians(), head * head_dim, head_dim),
                slice_cols(pe.table.weights(), head * head_dim, head_dim)));
        }
    }
    throw std::invalid_argument("slice_head_pe: bad pe kind");
}

Matrix multi_head(const Matrix& q_in, const Matrix& k_in, const Matrix& v_in,
                  const LinearAttentionSpec& spec, const Matrix& w_q, const Matrix& w_k,
                  const Matrix& w_v, const Matrix& w_o) {
    const std::size_t width = spec.heads * spec.head_dim;
    if (w_q.cols() != width || w_k.cols() != width || w_v.cols() != width ||
        w_o.rows() != width) {
        throw std::invalid_argument(
            "multi_head: projections " + shape_string(w_q) + "/" + shape_string(w_k) + "/" +
            shape_string(w_v) + "/" + shape_string(w_o) + " do not split into " +
            std::to_string(spec.heads) + " heads of width " + std::to_string(spec.head_dim));
    }
    const Matrix q = matmul(q_in, w_q);
    const Matrix k = matmul(k_in, w_k);
    const Matrix v = matmul(v_in, w_v);

    Matrix concat(q.rows(), width);
    for (std::size_t h = 0; h < spec.heads; ++h) {
        LinearAttentionSpec head_spec = spec;
        head_spec.heads = 1;
        head_spec.pe = slice_head_pe(spec.pe, h, spec.head_dim, spec.heads);
        const Matrix qh = slice_cols(q, h * spec.head_dim, spec.head_dim);
        const Matrix kh = slice_cols(k, h * spec.head_dim, spec.head_dim);
        const Matrix vh = slice_cols(v, h * spec.head_dim, spec.head_dim);
        paste_cols(concat, attention_forward(qh, kh, vh, head_spec).values, h * spec.head_dim);
    }
    return matmul(concat, w_o);
}

}  // namespace lmec
