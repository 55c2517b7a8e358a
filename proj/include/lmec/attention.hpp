#pragma once

#include <cstdint>
#include <vector>

#include "lmec/kernels.hpp"
#include "lmec/matrix.hpp"

namespace lmec {

enum class ProductOrder { Left, Right, Dynamic };
const char* order_name(ProductOrder order);

struct LinearAttentionSpec {
    ActivationKind activation = ActivationKind::EluPlusOne;
    PositionEmbedding pe{};
    ProductOrder product_order = ProductOrder::Dynamic;
    bool normalize = true;
    std::size_t head_dim = 64;
    std::size_t heads = 1;
};

struct AttentionOutput {
    Matrix values;
    ProductOrder resolved_order = ProductOrder::Left;
    std::uint64_t flop_estimate = 0;
};

// Quadratic softmax baseline; the O(N^2) reference the linear variants are
// checked against.
Matrix softmax_attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t d_k);

// One decomposable similarity contribution: S_t = q_side * k_side^T. The
// whole kernelized family reduces to a sum of such terms, which is exactly
// what makes both product orders available.
struct SimilarityTerm {
    Matrix q_side;  // n_q x r
    Matrix k_side;  // n_k x r
};

// Left grouping: materialize S = sum_t q_t k_t^T (n x n), then S * V.
Matrix terms_attention_left(const std::vector<SimilarityTerm>& terms, const Matrix& v,
                            bool normalize);
// Right grouping: sum_t q_t (k_t^T V); never materializes the n x n matrix.
Matrix terms_attention_right(const std::vector<SimilarityTerm>& terms, const Matrix& v,
                             bool normalize);

// Single-term entry points; q_prime and k_weighted are already activated and
// re-weighted.
Matrix linear_attention_left(const Matrix& q_prime, const Matrix& k_weighted, const Matrix& v,
                             bool normalize);
Matrix linear_attention_right(const Matrix& q_prime, const Matrix& k_weighted, const Matrix& v,
                              bool normalize);

// Assembles the similarity terms for the spec's variant from raw q, k:
// applies the kernel activation and the position re-weighting.
std::vector<SimilarityTerm> build_similarity_terms(const Matrix& q, const Matrix& k,
                                                   const LinearAttentionSpec& spec);

// Left when n <= head_dim, Right when n > head_dim; per-head dimension is the
// crossover-relevant quantity since the trade is O(N^2 d) vs O(N d^2) per head.
ProductOrder dynamic_dispatch(const LinearAttentionSpec& spec, std::size_t n);

// Multiply-add count for one forward evaluation at the given order.
// Decomposed bias terms are counted at head width.
std::uint64_t linear_attention_flops(PeKind kind, ProductOrder order, std::size_t n,
                                     std::size_t d_k, std::size_t d_v, bool normalize);

AttentionOutput cosformer_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                    const LinearAttentionSpec& spec);
AttentionOutput lmla_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                               const LinearAttentionSpec& spec);
AttentionOutput a_rpe_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const LinearAttentionSpec& spec);
// Dispatches on spec.pe.kind.
AttentionOutput attention_forward(const Matrix& q, const Matrix& k, const Matrix& v,
                                  const LinearAttentionSpec& spec);

// Per-head view of the position embedding payload (MApe extension and LmApe
// table are stored at heads * head_dim width and sliced per head).
PositionEmbedding slice_head_pe(const PositionEmbedding& pe, std::size_t head,
                                std::size_t head_dim, std::size_t heads);

// Project, split columns into heads, run the spec'd attention per head,
// concatenate, project out.
Matrix multi_head(const Matrix& q_in, const Matrix& k_in, const Matrix& v_in,
                  const LinearAttentionSpec& spec, const Matrix& w_q, const Matrix& w_k,
                  const Matrix& w_v, const Matrix& w_o);

}  // namespace lmec
