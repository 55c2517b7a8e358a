#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lmec/attention.hpp"
#include "lmec/blocks.hpp"
#include "lmec/matrix.hpp"

namespace lmec {

constexpr double kFiniteDiffEps = 1e-5;
constexpr double kGradTolerance = 1e-6;

struct GradReport {
    std::string op_name;
    std::string tensor_name;
    double max_rel_error = 0.0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
    double eps_used = 0.0;
};

inline constexpr const char* kGradReportCsvHeader = "op_name,tensor_name,max_rel_error,eps";
std::string gradreport_csv_line(const GradReport& r);

using ScalarFn = std::function<double(const Matrix&)>;

// Central difference (f(x + eps e) - f(x - eps e)) / 2 eps per coordinate.
// This is the independent oracle every analytic backward pass is checked
// against.
Matrix finite_diff_grad(const ScalarFn& f, const Matrix& x, double eps);

// 1 = coordinate excluded from comparison (finite differences straddle a
// non-differentiable point there).
using SkipMask = std::vector<std::uint8_t>;

// max_rel_error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) with
// infinity norms over the unmasked coordinates; worst_coordinate is the argmax
// of the numerator. Normalizing by the gradient's scale keeps the metric
// meaningful on coordinates that sit below the central-difference noise floor.
GradReport compare_gradients(std::string op_name, std::string tensor_name,
                             const Matrix& analytic, const Matrix& numeric, double eps,
                             const SkipMask* skip = nullptr);

// Masks for kinked activations (Relu at 0; EluPlusOne's second derivative
// jumps at 0). A coordinate is excluded when a +-eps perturbation can move a
// pre-activation entry to within 10 eps of the kink.
SkipMask kink_mask_direct(const Matrix& preact, ActivationKind kind, double eps);
SkipMask kink_mask_direct_glu(const Matrix& preact, GluActivation kind, double eps);
// For w in pre = x * w: perturbing w(a, b) moves pre(i, b) by eps * x(i, a).
SkipMask kink_mask_projection(const Matrix& x, const Matrix& preact, bool kinked, double eps);
// For x in pre = x * w: perturbing x(i, a) moves pre(i, b) by eps * w(a, b).
SkipMask kink_mask_input(const Matrix& w, const Matrix& preact, bool kinked, double eps);
// For b in pre = x * w + b: perturbing b(0, b) shifts the whole column b.
SkipMask kink_mask_bias(const Matrix& preact, bool kinked, double eps);

// Gradients of sum(upstream (x) attention(q, k, v)) through the resolved
// product order. dtable / dextension are empty unless the spec's PE carries
// that payload; dtable rows at positions >= n stay zero.
struct AttentionGrads {
    Matrix dq;
    Matrix dk;
    Matrix dv;
    Matrix dtable;
    Matrix dextension;
};
AttentionGrads backward_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                  const LinearAttentionSpec& spec, const Matrix& upstream);

struct MultiHeadGrads {
    Matrix dw_q, dw_k, dw_v, dw_o;
    Matrix dtable;
    Matrix dextension;
    Matrix dx_q, dx_k, dx_v;
};
MultiHeadGrads backward_multi_head(const Matrix& xq, const Matrix& xk, const Matrix& xv,
                                   const LinearAttentionSpec& spec, const Matrix& w_q,
                                   const Matrix& w_k, const Matrix& w_v, const Matrix& w_o,
                                   const Matrix& upstream);

struct FfnGrads {
    Matrix dx, dw1, db1, dw2, db2;
};
FfnGrads backward_ffn(const Matrix& x, const FfnParams& p, const Matrix& upstream);

struct GluGrads {
    Matrix dx, dw1, db1, dw2, db2, dw3, db3;
};
GluGrads backward_glu(const Matrix& x, const GluParams& p, const Matrix& upstream);

// Full verification battery: every learnable tensor of every attention
// variant (activations x PE styles, both product orders) plus GLU and FFN
// weights for every gate activation, against the finite-difference oracle on
// three derived seeds.
std::vector<GradReport> run_all_gradient_checks(std::uint64_t seed);

}  // namespace lmec
