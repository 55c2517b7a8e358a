#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lmec/matrix.hpp"
#include "lmec/rng.hpp"

namespace lmec {

class Rng;

// Kernel activations: every kind maps the reals onto [0, inf) so that kernel
// similarities stay non-negative and row-normalization is a convex average.
enum class ActivationKind { Relu, Sigmoid, TanhShift, EluPlusOne };

double activation_value(ActivationKind kind, double x);
// Relu uses subgradient 0 at exactly 0.
double activation_derivative(ActivationKind kind, double x);
// True for kinds whose value or derivative has a corner at 0 (Relu,
// EluPlusOne); finite-difference checks must skip coordinates near it.
bool activation_has_kink(ActivationKind kind);
const char* activation_name(ActivationKind kind);

Matrix apply_activation(ActivationKind kind, const Matrix& x);
Matrix apply_activation_derivative(ActivationKind kind, const Matrix& x);

// Per-position phase weights cos(pi*i / 2M), sin(pi*i / 2M) for i = 0..n-1.
struct PhaseVectors {
    std::vector<double> cos_weights;
    std::vector<double> sin_weights;
};
PhaseVectors cosformer_phase_vectors(std::size_t max_len, std::size_t n);

// Absolute re-weighting rows: row j = cos(pi*j / 2M) * extension, with
// extension a learnable 1 x d_k widening of the scalar weight.
Matrix m_ape_weights(std::size_t max_len, std::size_t n, const Matrix& extension);

// Learnable table of per-position angles; the key re-weighting is cos of it.
// The cosine weights are kept in lockstep with the angles at construction and
// update time so forward passes never re-evaluate the whole table.
class LearnablePositionTable {
public:
    LearnablePositionTable() = default;
    explicit LearnablePositionTable(Matrix radians);

    // Angles uniform on [0, pi/2] so initial weights lie in (0, 1].
    static LearnablePositionTable uniform_init(std::size_t max_len, std::size_t d_k, Rng& rng);

    const Matrix& radians() const { return radians_; }
    const Matrix& weights() const { return weights_; }  // cos(radians)
    std::size_t max_len() const { return radians_.rows(); }
    std::size_t dim() const { return radians_.cols(); }

    // Optimizer entry point: replaces the angles and rebuilds the weights.
    void set_radians(Matrix radians);
    // For callers that wrote through mutable_radians (deserialization).
    void refresh_weights();
    // Serialization needs a stable slot to write into; call refresh_weights
    // after any direct write.
    Matrix& mutable_radians() { return radians_; }

    // Pre-sliced view for one head; both parts must stay entry-wise matched.
    static LearnablePositionTable from_parts(Matrix radians, Matrix weights);

private:
    Matrix radians_;
    Matrix weights_;
};

// Rows 0..n-1 of cos(table); applied to the key matrix only.
Matrix lm_ape_weights(const LearnablePositionTable& table, std::size_t n);

// Additive relative bias B[i][j] = cos(pi*(i-j) / 2M) in decomposed form:
// B = cos_q cos_k^T + sin_q sin_k^T, so B*V stays right-product computable.
struct ArpeBiasTerms {
    std::vector<double> cos_q;
    std::vector<double> cos_k;
    std::vector<double> sin_q;
    std::vector<double> sin_k;
};
ArpeBiasTerms a_rpe_bias_terms(std::size_t max_len, std::size_t n);

enum class PeKind { Npe, MRpe, MApe, LmApe, ARpe };
const char* pe_name(PeKind kind);

// Position-embedding choice plus its payload. max_len is a construction-time
// constant; every call with sequence length n > max_len is rejected so the
// weights stay consistent across sequence lengths.
struct PositionEmbedding {
    PeKind kind = PeKind::Npe;
    std::size_t max_len = 0;
    Matrix extension;              // MApe: 1 x d_k
    LearnablePositionTable table;  // LmApe

    static PositionEmbedding npe();
    static PositionEmbedding m_rpe(std::size_t max_len);
    static PositionEmbedding m_ape(std::size_t max_len, Matrix extension);
    static PositionEmbedding lm_ape(LearnablePositionTable table);
    static PositionEmbedding a_rpe(std::size_t max_len);
};

}  // namespace lmec
