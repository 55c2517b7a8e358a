#include "lmec/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace lmec {

namespace {

constexpr double kGeluScale = 0.7978845608;  // sqrt(2/pi), tanh approximation
constexpr double kGeluCubic = 0.044715;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double glu_activation_value(GluActivation kind, double x) {
    switch (kind) {
        case GluActivation::Swish:
            return x * sigmoid(x);
        case GluActivation::Elu:
            return x >= 0.0 ? x : std::exp(x) - 1.0;
        case GluActivation::Relu:
            return x > 0.0 ? x : 0.0;
        case GluActivation::Gelu: {
            const double u = kGeluScale * (x + kGeluCubic * x * x * x);
            return 0.5 * x * (1.0 + std::tanh(u));
        }
    }
    throw std::invalid_argument("glu_activation_value: bad kind");
}

double glu_activation_derivative(GluActivation kind, double x) {
    switch (kind) {
        case GluActivation::Swish: {
            const double s = sigmoid(x);
            return s + x * s * (1.0 - s);
        }
        case GluActivation::Elu:
            return x >= 0.0 ? 1.0 : std::exp(x);
        case GluActivation::Relu:
            return x > 0.0 ? 1.0 : 0.0;
        case GluActivation::Gelu: {
            const double u = kGeluScale * (x + kGeluCubic * x * x * x);
            const double t = std::tanh(u);
            const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
        }
    }
    throw std::invalid_argument("glu_activation_derivative: bad kind");
}

const char* glu_activation_name(GluActivation kind) {
    switch (kind) {
        case GluActivation::Swish: return "swish";
        case GluActivation::Elu: return "elu";
        case GluActivation::Relu: return "relu";
        case GluActivation::Gelu: return "gelu";
    }
    return "?";
}

Matrix apply_glu_activation(GluActivation kind, const Matrix& x) {
    Matrix r(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.values().size(); ++i) {
        r.values()[i] = glu_activation_value(kind, x.values()[i]);
    }
    return r;
}

namespace {

Matrix add_row_bias(Matrix a, const Matrix& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) {
        throw std::invalid_argument("add_row_bias: bias is " + shape_string(bias) +
                                    ", matrix is " + shape_string(a));
    }
    const double* b = bias.row_ptr(0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* row = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) row[j] += b[j];
    }
    return a;
}

Matrix add_scaled(const Matrix& x, const Matrix& f, double scale) {
    Matrix r(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.values().size(); ++i) {
        r.values()[i] = x.values()[i] + scale * f.values()[i];
    }
    return r;
}

}  // namespace

Matrix ffn_forward(const Matrix& x, const FfnParams& p) {
    if (x.cols() != p.w1.rows()) {
        throw std::invalid_argument("ffn_forward: x is " + shape_string(x) + ", w1 is " +
                                    shape_string(p.w1));
    }
    const Matrix hidden = apply_glu_activation(p.activation, add_row_bias(matmul(x, p.w1), p.b1));
    return add_row_bias(matmul(hidden, p.w2), p.b2);
}

Matrix glu_forward(const Matrix& x, const GluParams& p) {
    if (x.cols() != p.w1.rows() || x.cols() != p.w2.rows()) {
        throw std::invalid_argument("glu_forward: x is " + shape_string(x) + ", w1 is " +
                                    shape_string(p.w1) + ", w2 is " + shape_string(p.w2));
    }
    const Matrix gate = apply_glu_activation(p.activation, add_row_bias(matmul(x, p.w1), p.b1));
    const Matrix linear = add_row_bias(matmul(x, p.w2), p.b2);
    return add_row_bias(matmul(elementwise(gate, linear, BinaryOp::Mul), p.w3), p.b3);
}

Matrix feed_forward(const Matrix& x, const FeedForwardParams& p) {
    if (const auto* ffn = std::get_if<FfnParams>(&p)) return ffn_forward(x, *ffn);
    return glu_forward(x, std::get<GluParams>(p));
}

Matrix layer_norm(const Matrix& x, const LayerNormParams& p, double eps) {
    if (p.gamma.cols() != x.cols() || p.beta.cols() != x.cols()) {
        throw std::invalid_argument("layer_norm: x is " + shape_string(x) + ", gamma is " +
                                    shape_string(p.gamma) + ", beta is " + shape_string(p.beta));
    }
    Matrix r(x.rows(), x.cols());
    const double inv_dim = 1.0 / static_cast<double>(x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* in = x.row_ptr(i);
        double* out = r.row_ptr(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) mean += in[j];
        mean *= inv_dim;
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double d = in[j] - mean;
            var += d * d;
        }
        var *= inv_dim;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            out[j] = (in[j] - mean) * inv_std * p.gamma(0, j) + p.beta(0, j);
        }
    }
    return r;
}

Matrix conv_module_forward(const Matrix& x, const ConvParams& p) {
    const std::size_t dim = x.cols();
    if (p.w_in.rows() != dim || p.w_in.cols() != 2 * dim) {
        throw std::invalid_argument("conv_module_forward: x is " + shape_string(x) +
                                    ", w_in is " + shape_string(p.w_in));
    }
    if (p.depthwise.cols() != dim || p.depthwise.rows() % 2 == 0) {
        throw std::invalid_argument("conv_module_forward: depthwise kernel is " +
                                    shape_string(p.depthwise) + ", needs odd width x " +
                                    std::to_string(dim));
    }
    const Matrix expanded = add_row_bias(matmul(x, p.w_in), p.b_in);
    const Matrix linear = slice_cols(expanded, 0, dim);
    const Matrix gate = apply_glu_activation(p.gate, slice_cols(expanded, dim, dim));
    const Matrix gated = elementwise(linear, gate, BinaryOp::Mul);

    const std::size_t width = p.depthwise.rows();
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
    Matrix conv(x.rows(), dim);
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        double* out = conv.row_ptr(t);
        for (std::size_t u = 0; u < width; ++u) {
            // Same-padding with edge replication.
            std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(u) - half;
            src = std::min(std::max(src, std::ptrdiff_t{0}), n - 1);
            const double* in = gated.row_ptr(src);
            const double* kern = p.depthwise.row_ptr(u);
            for (std::size_t c = 0; c < dim; ++c) out[c] += kern[c] * in[c];
        }
        for (std::size_t c = 0; c < dim; ++c) out[c] += p.b_dw(0, c);
    }
    return add_row_bias(matmul(conv, p.w_out), p.b_out);
}

std::vector<const Matrix*> BlockParams::tensors() const {
    auto mut = const_cast<BlockParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::vector<Matrix*> BlockParams::tensors() {
    std::vector<Matrix*> out;
    auto add_ff = [&out](FeedForwardParams& ff) {
        if (auto* ffn = std::get_if<FfnParams>(&ff)) {
            out.insert(out.end(), {&ffn->w1, &ffn->b1, &ffn->w2, &ffn->b2});
        } else {
            auto& glu = std::get<GluParams>(ff);
            out.insert(out.end(), {&glu.w1, &glu.b1, &glu.w2, &glu.b2, &glu.w3, &glu.b3});
        }
    };
    auto add_ln = [&out](LayerNormParams& ln) {
        out.push_back(&ln.gamma);
        out.push_back(&ln.beta);
    };
    add_ln(ln_ff_pre);
    add_ff(ff_pre);
    add_ln(ln_attn);
    out.insert(out.end(), {&attn.w_q, &attn.w_k, &attn.w_v, &attn.w_o});
    if (attn_spec.pe.kind == PeKind::MApe) out.push_back(&attn_spec.pe.extension);
    if (attn_spec.pe.kind == PeKind::LmApe) out.push_back(&attn_spec.pe.table.mutable_radians());
    add_ln(ln_conv);
    out.insert(out.end(),
               {&conv.w_in, &conv.b_in, &conv.depthwise, &conv.b_dw, &conv.w_out, &conv.b_out});
    add_ln(ln_ff_post);
    add_ff(ff_post);
    add_ln(ln_out);
    return out;
}

Matrix lmec_block_forward(const Matrix& x, const BlockParams& p) {
    const Matrix x1 = add_scaled(x, feed_forward(layer_norm(x, p.ln_ff_pre), p.ff_pre), 0.5);
    const Matrix xn = layer_norm(x1, p.ln_attn);
    const Matrix x2 = add_scaled(
        x1, multi_head(xn, xn, xn, p.attn_spec, p.attn.w_q, p.attn.w_k, p.attn.w_v, p.attn.w_o),
        1.0);
    const Matrix x3 =
        add_scaled(x2, conv_module_forward(layer_norm(x2, p.ln_conv), p.conv), 1.0);
    const Matrix x4 =
        add_scaled(x3, feed_forward(layer_norm(x3, p.ln_ff_post), p.ff_post), 0.5);
    return layer_norm(x4, p.ln_out);
}

namespace {

Matrix glorot(Rng& rng, std::size_t rows, std::size_t cols) {
    return rng.matrix_normal(rows, cols, 1.0 / std::sqrt(static_cast<double>(rows)));
}

FeedForwardParams make_ff(const BlockConfig& cfg, Rng& rng) {
    if (cfg.use_glu) {
        GluParams p;
        const std::size_t h = glu_hidden_dim(cfg.h_ffn);
        p.w1 = glorot(rng, cfg.model_dim, h);
        p.b1 = Matrix(1, h);
        p.w2 = glorot(rng, cfg.model_dim, h);
        p.b2 = Matrix(1, h);
        p.w3 = glorot(rng, h, cfg.model_dim);
        p.b3 = Matrix(1, cfg.model_dim);
        p.activation = cfg.ff_activation;
        return p;
    }
    FfnParams p;
    p.w1 = glorot(rng, cfg.model_dim, cfg.h_ffn);
    p.b1 = Matrix(1, cfg.h_ffn);
    p.w2 = glorot(rng, cfg.h_ffn, cfg.model_dim);
    p.b2 = Matrix(1, cfg.model_dim);
    p.activation = cfg.ff_activation;
    return p;
}

LayerNormParams make_ln(std::size_t dim) {
    return {Matrix::filled(1, dim, 1.0), Matrix(1, dim)};
}

}  // namespace

BlockParams make_block_params(const BlockConfig& cfg, Rng& rng) {
    if (cfg.model_dim % cfg.heads != 0) {
        throw std::invalid_argument("make_block_params: model dim " +
                                    std::to_string(cfg.model_dim) + " not divisible by " +
                                    std::to_string(cfg.heads) + " heads");
    }
    BlockParams p;
    p.ff_pre = make_ff(cfg, rng);
    p.ff_post = make_ff(cfg, rng);
    p.attn.w_q = glorot(rng, cfg.model_dim, cfg.model_dim);
    p.attn.w_k = glorot(rng, cfg.model_dim, cfg.model_dim);
    p.attn.w_v = glorot(rng, cfg.model_dim, cfg.model_dim);
    p.attn.w_o = glorot(rng, cfg.model_dim, cfg.model_dim);

    p.attn_spec.activation = cfg.attn_activation;
    p.attn_spec.product_order = cfg.product_order;
    p.attn_spec.normalize = cfg.normalize;
    p.attn_spec.heads = cfg.heads;
    p.attn_spec.head_dim = cfg.model_dim / cfg.heads;
    switch (cfg.pe_kind) {
        case PeKind::Npe:
            p.attn_spec.pe = PositionEmbedding::npe();
            break;
        case PeKind::MRpe:
            p.attn_spec.pe = PositionEmbedding::m_rpe(cfg.max_len);
            break;
        case PeKind::MApe:
            p.attn_spec.pe =
                PositionEmbedding::m_ape(cfg.max_len, Matrix::filled(1, cfg.model_dim, 1.0));
            break;
        case PeKind::LmApe:
            p.attn_spec.pe = PositionEmbedding::lm_ape(
                LearnablePositionTable::uniform_init(cfg.max_len, cfg.model_dim, rng));
            break;
        case PeKind::ARpe:
            p.attn_spec.pe = PositionEmbedding::a_rpe(cfg.max_len);
            break;
    }

    p.conv.w_in = glorot(rng, cfg.model_dim, 2 * cfg.model_dim);
    p.conv.b_in = Matrix(1, 2 * cfg.model_dim);
    p.conv.gate = GluActivation::Relu;
    p.conv.depthwise = glorot(rng, cfg.conv_kernel_width, cfg.model_dim);
    p.conv.b_dw = Matrix(1, cfg.model_dim);
    p.conv.w_out = glorot(rng, cfg.model_dim, cfg.model_dim);
    p.conv.b_out = Matrix(1, cfg.model_dim);

    p.ln_ff_pre = make_ln(cfg.model_dim);
    p.ln_attn = make_ln(cfg.model_dim);
    p.ln_conv = make_ln(cfg.model_dim);
    p.ln_ff_post = make_ln(cfg.model_dim);
    p.ln_out = make_ln(cfg.model_dim);
    return p;
}

}  // namespace lmec
