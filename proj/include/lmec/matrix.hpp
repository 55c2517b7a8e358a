#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lmec {

// Dense row-major matrix of doubles. The single tensor type of the library:
// projections, activations, similarity matrices and position tables are all
// instances of this. All computation is done in 64-bit floats.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);
    static Matrix filled(std::size_t rows, std::size_t cols, double value);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    std::span<const double> row(std::size_t i) const { return {row_ptr(i), cols_}; }

    const std::vector<double>& values() const { return data_; }
    std::vector<double>& values() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class BinaryOp { Add, Mul };

std::string shape_string(const Matrix& a);

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T; the natural shape for Q K^T style products (rows dotted with rows).
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);
// a^T * b; the natural shape for weight gradients x^T dY.
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Row-wise softmax with per-row max subtraction.
Matrix softmax_rows(const Matrix& a);

Matrix elementwise(const Matrix& a, const Matrix& b, BinaryOp op);
// Multiplies every row of a entry-wise by the 1 x cols vector v.
Matrix broadcast_row_mul(const Matrix& a, const Matrix& v);
// Multiplies row i of a by the scalar factors[i].
Matrix scale_rows(const Matrix& a, std::span<const double> factors);

std::vector<double> row_sums(const Matrix& a);
std::vector<double> column_sums(const Matrix& a);

Matrix slice_cols(const Matrix& a, std::size_t start, std::size_t count);
void paste_cols(Matrix& dst, const Matrix& src, std::size_t start);
Matrix slice_rows(const Matrix& a, std::size_t start, std::size_t count);

double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
// ||a - ref||_inf / ||ref||_inf with a floor to keep zero references sane.
double relative_error(const Matrix& a, const Matrix& ref);

// Thread budget for internal parallelism, from LMEC_THREADS (default 1).
int thread_cap();

}  // namespace lmec
