#include "lmec/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lmec/rng.hpp"

namespace lmec {

double activation_value(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::Relu:
            return x > 0.0 ? x : 0.0;
        case ActivationKind::Sigmoid:
            return 1.0 / (1.0 + std::exp(-x));
        case ActivationKind::TanhShift:
            return 0.5 * std::tanh(x) + 0.5;
        case ActivationKind::EluPlusOne:
            return x >= 0.0 ? x + 1.0 : std::exp(x);
    }
    throw std::invalid_argument("activation_value: bad kind");
}

double activation_derivative(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::Relu:
            return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case ActivationKind::TanhShift: {
            const double t = std::tanh(x);
            return 0.5 * (1.0 - t * t);
        }
        case ActivationKind::EluPlusOne:
            return x >= 0.0 ? 1.0 : std::exp(x);
    }
    throw std::invalid_argument("activation_derivative: bad kind");
}

bool activation_has_kink(ActivationKind kind) {
    return kind == ActivationKind::Relu || kind == ActivationKind::EluPlusOne;
}

const char* activation_name(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Relu: return "relu";
        case ActivationKind::Sigmoid: return "sigmoid";
        case ActivationKind::TanhShift: return "tanh";
        case ActivationKind::EluPlusOne: return "elu";
    }
    return "?";
}

Matrix apply_activation(ActivationKind kind, const Matrix& x) {
    Matrix r(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.values().size(); ++i) {
        r.values()[i] = activation_value(kind, x.values()[i]);
    }
    return r;
}

Matrix apply_activation_derivative(ActivationKind kind, const Matrix& x) {
    Matrix r(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.values().size(); ++i) {
        r.values()[i] = activation_derivative(kind, x.values()[i]);
    }
    return r;
}

namespace {

void check_length(std::size_t max_len, std::size_t n, const char* op) {
    if (n > max_len) {
        throw std::invalid_argument(std::string(op) + ": sequence length " + std::to_string(n) +
                                    " exceeds max length " + std::to_string(max_len) +
                                    " (cosine weights would leave the [0, pi/2] regime)");
    }
}

}  // namespace

PhaseVectors cosformer_phase_vectors(std::size_t max_len, std::size_t n) {
    check_length(max_len, n, "cosformer_phase_vectors");
    PhaseVectors pv;
    pv.cos_weights.resize(n);
    pv.sin_weights.resize(n);
    const double step = std::numbers::pi / (2.0 * static_cast<double>(max_len));
    for (std::size_t i = 0; i < n; ++i) {
        const double angle = step * static_cast<double>(i);
        pv.cos_weights[i] = std::cos(angle);
        pv.sin_weights[i] = std::sin(angle);
    }
    return pv;
}

Matrix m_ape_weights(std::size_t max_len, std::size_t n, const Matrix& extension) {
    check_length(max_len, n, "m_ape_weights");
    if (extension.rows() != 1) {
        throw std::invalid_argument("m_ape_weights: extension must be a row vector, got " +
                                    shape_string(extension));
    }
    Matrix r(n, extension.cols());
    const double step = std::numbers::pi / (2.0 * static_cast<double>(max_len));
    for (std::size_t j = 0; j < n; ++j) {
        const double w = std::cos(step * static_cast<double>(j));
        double* out = r.row_ptr(j);
        const double* ext = extension.row_ptr(0);
        for (std::size_t c = 0; c < extension.cols(); ++c) out[c] = w * ext[c];
    }
    return r;
}

LearnablePositionTable::LearnablePositionTable(Matrix radians) : radians_(std::move(radians)) {
    refresh_weights();
}

LearnablePositionTable LearnablePositionTable::uniform_init(std::size_t max_len, std::size_t d_k,
                                                            Rng& rng) {
    return LearnablePositionTable(
        rng.matrix_uniform(max_len, d_k, 0.0, std::numbers::pi / 2.0));
}

void LearnablePositionTable::set_radians(Matrix radians) {
    radians_ = std::move(radians);
    refresh_weights();
}

void LearnablePositionTable::refresh_weights() {
    weights_ = Matrix(radians_.rows(), radians_.cols());
    for (std::size_t i = 0; i < radians_.values().size(); ++i) {
        weights_.values()[i] = std::cos(radians_.values()[i]);
    }
}

LearnablePositionTable LearnablePositionTable::from_parts(Matrix radians, Matrix weights) {
    if (!radians.same_shape(weights)) {
        throw std::invalid_argument("LearnablePositionTable::from_parts: radians " +
                                    shape_string(radians) + " vs weights " +
                                    shape_string(weights));
    }
    LearnablePositionTable t;
    t.radians_ = std::move(radians);
    t.weights_ = std::move(weights);
    return t;
}

Matrix lm_ape_weights(const LearnablePositionTable& table, std::size_t n) {
    check_length(table.max_len(), n, "lm_ape_weights");
    return slice_rows(table.weights(), 0, n);
}

ArpeBiasTerms a_rpe_bias_terms(std::size_t max_len, std::size_t n) {
    check_length(max_len, n, "a_rpe_bias_terms");
    const PhaseVectors pv = cosformer_phase_vectors(max_len, n);
    ArpeBiasTerms t;
    t.cos_q = pv.cos_weights;
    t.cos_k = pv.cos_weights;
    t.sin_q = pv.sin_weights;
    t.sin_k = pv.sin_weights;
    return t;
}

const char* pe_name(PeKind kind) {
    switch (kind) {
        case PeKind::Npe: return "npe";
        case PeKind::MRpe: return "mrpe";
        case PeKind::MApe: return "mape";
        case PeKind::LmApe: return "lmape";
        case PeKind::ARpe: return "arpe";
    }
    return "?";
}

PositionEmbedding PositionEmbedding::npe() {
    return PositionEmbedding{};
}

PositionEmbedding PositionEmbedding::m_rpe(std::size_t max_len) {
    PositionEmbedding pe;
    pe.kind = PeKind::MRpe;
    pe.max_len = max_len;
    return pe;
}

PositionEmbedding PositionEmbedding::m_ape(std::size_t max_len, Matrix extension) {
    if (extension.rows() != 1) {
        throw std::invalid_argument("PositionEmbedding::m_ape: extension must be 1 x d_k, got " +
                                    shape_string(extension));
    }
    PositionEmbedding pe;
    pe.kind = PeKind::MApe;
    pe.max_len = max_len;
    pe.extension = std::move(extension);
    return pe;
}

PositionEmbedding PositionEmbedding::lm_ape(LearnablePositionTable table) {
    PositionEmbedding pe;
    pe.kind = PeKind::LmApe;
    pe.max_len = table.max_len();
    pe.table = std::move(table);
    return pe;
}

PositionEmbedding PositionEmbedding::a_rpe(std::size_t max_len) {
    PositionEmbedding pe;
    pe.kind = PeKind::ARpe;
    pe.max_len = max_len;
    return pe;
}

}  // namespace lmec
