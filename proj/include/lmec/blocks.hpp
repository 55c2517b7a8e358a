#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "lmec/attention.hpp"
#include "lmec/matrix.hpp"
#include "lmec/rng.hpp"

namespace lmec {

// Pointwise activations for the feed-forward / gated paths. Unlike the kernel
// activations these are free to be sign-preserving.
enum class GluActivation { Swish, Elu, Relu, Gelu };

double glu_activation_value(GluActivation kind, double x);
double glu_activation_derivative(GluActivation kind, double x);
const char* glu_activation_name(GluActivation kind);
Matrix apply_glu_activation(GluActivation kind, const Matrix& x);

// Two-projection feed-forward: sigma(x W1 + b1) W2 + b2.
struct FfnParams {
    Matrix w1;  // h_o x h_ffn
    Matrix b1;  // 1 x h_ffn
    Matrix w2;  // h_ffn x h_o
    Matrix b2;  // 1 x h_o
    GluActivation activation = GluActivation::Swish;

    std::size_t weight_count() const { return w1.size() + w2.size(); }
    std::size_t param_count() const { return weight_count() + b1.size() + b2.size(); }
};

// Gated substitute: (sigma(x W1 + b1) (x) (x W2 + b2)) W3 + b3 with the
// hidden width shrunk to 2/3 of the feed-forward width to keep parameter
// counts matched.
struct GluParams {
    Matrix w1;  // h_o x h_glu, gate path
    Matrix b1;  // 1 x h_glu
    Matrix w2;  // h_o x h_glu, linear path
    Matrix b2;  // 1 x h_glu
    Matrix w3;  // h_glu x h_o
    Matrix b3;  // 1 x h_o
    GluActivation activation = GluActivation::Gelu;

    std::size_t weight_count() const { return w1.size() + w2.size() + w3.size(); }
    std::size_t param_count() const {
        return weight_count() + b1.size() + b2.size() + b3.size();
    }
};

// floor(2 h_ffn / 3); floor keeps the gated variant at-or-under the
// feed-forward parameter count.
constexpr std::size_t glu_hidden_dim(std::size_t h_ffn) { return (2 * h_ffn) / 3; }

Matrix ffn_forward(const Matrix& x, const FfnParams& p);
Matrix glu_forward(const Matrix& x, const GluParams& p);

using FeedForwardParams = std::variant<FfnParams, GluParams>;
Matrix feed_forward(const Matrix& x, const FeedForwardParams& p);

struct LayerNormParams {
    Matrix gamma;  // 1 x dim
    Matrix beta;   // 1 x dim
};
Matrix layer_norm(const Matrix& x, const LayerNormParams& p, double eps = 1e-5);

// Minimal convolution module: pointwise expansion with a gated split,
// depthwise convolution with edge-replicated same-padding, pointwise
// projection.
struct ConvParams {
    Matrix w_in;       // dim x 2*dim
    Matrix b_in;       // 1 x 2*dim
    GluActivation gate = GluActivation::Relu;
    Matrix depthwise;  // width x dim, width odd
    Matrix b_dw;       // 1 x dim
    Matrix w_out;      // dim x dim
    Matrix b_out;      // 1 x dim
};
Matrix conv_module_forward(const Matrix& x, const ConvParams& p);

struct AttentionParams {
    Matrix w_q;
    Matrix w_k;
    Matrix w_v;
    Matrix w_o;
};

// Every learnable tensor of one block: the Macaron feed-forward pair (each
// slot either FFN or GLU), attention projections plus the spec's PE payload,
// the convolution module, and per-submodule layer norms.
struct BlockParams {
    FeedForwardParams ff_pre;
    FeedForwardParams ff_post;
    AttentionParams attn;
    LinearAttentionSpec attn_spec;
    ConvParams conv;
    LayerNormParams ln_ff_pre;
    LayerNormParams ln_attn;
    LayerNormParams ln_conv;
    LayerNormParams ln_ff_post;
    LayerNormParams ln_out;

    // Declaration order used by the serialization format.
    std::vector<const Matrix*> tensors() const;
    std::vector<Matrix*> tensors();
};

// Macaron composition: half feed-forward residual, attention residual,
// convolution residual, second half feed-forward residual, final layer norm.
// Each residual branch pre-normalizes its input.
Matrix lmec_block_forward(const Matrix& x, const BlockParams& p);

struct BlockConfig {
    std::size_t model_dim = 256;
    std::size_t heads = 4;
    std::size_t h_ffn = 2048;
    bool use_glu = true;
    GluActivation ff_activation = GluActivation::Gelu;
    ActivationKind attn_activation = ActivationKind::EluPlusOne;
    PeKind pe_kind = PeKind::LmApe;
    std::size_t max_len = 4096;
    std::size_t conv_kernel_width = 15;
    bool normalize = true;
    ProductOrder product_order = ProductOrder::Dynamic;
};

BlockParams make_block_params(const BlockConfig& cfg, Rng& rng);

}  // namespace lmec
