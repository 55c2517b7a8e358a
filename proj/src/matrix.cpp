#include "lmec/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <thread>

namespace lmec {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("Matrix: " + std::to_string(data_.size()) +
                                    " values for shape " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::filled(std::size_t rows, std::size_t cols, double value) {
    Matrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), value);
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw std::invalid_argument("Matrix::from_rows: ragged row " + std::to_string(i));
        }
        std::copy(row.begin(), row.end(), m.row_ptr(i));
        ++i;
    }
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string shape_string(const Matrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

int thread_cap() {
    static const int cap = [] {
        const char* env = std::getenv("LMEC_THREADS");
        if (env == nullptr) return 1;
        const long v = std::strtol(env, nullptr, 10);
        if (v < 1) return 1;
        return static_cast<int>(std::min<long>(v, 256));
    }();
    return cap;
}

namespace {

// Splits [0, total) into contiguous chunks, one per worker thread.
void parallel_rows(std::size_t total, const std::function<void(std::size_t, std::size_t)>& body) {
    const int cap = thread_cap();
    if (cap <= 1 || total < 64) {
        body(0, total);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(cap, total);
    const std::size_t chunk = (total + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(total, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dims differ, a is " + shape_string(a) +
                                    ", b is " + shape_string(b));
    }
    Matrix r(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t n = b.cols();
    parallel_rows(a.rows(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* out = r.row_ptr(i);
            const double* arow = a.row_ptr(i);
            for (std::size_t k = 0; k < inner; ++k) {
                const double aik = arow[k];
                const double* brow = b.row_ptr(k);
                for (std::size_t j = 0; j < n; ++j) {
                    out[j] += aik * brow[j];
                }
            }
        }
    });
    return r;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("matmul_transpose_b: widths differ, a is " + shape_string(a) +
                                    ", b is " + shape_string(b));
    }
    Matrix r(a.rows(), b.rows());
    const std::size_t inner = a.cols();
    parallel_rows(a.rows(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* arow = a.row_ptr(i);
            double* out = r.row_ptr(i);
            for (std::size_t j = 0; j < b.rows(); ++j) {
                const double* brow = b.row_ptr(j);
                double acc = 0.0;
                for (std::size_t k = 0; k < inner; ++k) acc += arow[k] * brow[k];
                out[j] = acc;
            }
        }
    });
    return r;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("matmul_transpose_a: heights differ, a is " + shape_string(a) +
                                    ", b is " + shape_string(b));
    }
    Matrix r(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            double* out = r.row_ptr(i);
            const double aki = arow[i];
            for (std::size_t j = 0; j < n; ++j) {
                out[j] += aki * brow[j];
            }
        }
    }
    return r;
}

Matrix transpose(const Matrix& a) {
    Matrix r(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            r(j, i) = a(i, j);
        }
    }
    return r;
}

Matrix softmax_rows(const Matrix& a) {
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* in = a.row_ptr(i);
        double* out = r.row_ptr(i);
        double mx = in[0];
        for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out[j] = std::exp(in[j] - mx);
            sum += out[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] *= inv;
    }
    return r;
}

Matrix elementwise(const Matrix& a, const Matrix& b, BinaryOp op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("elementwise: shapes differ, a is " + shape_string(a) +
                                    ", b is " + shape_string(b));
    }
    Matrix r(a.rows(), a.cols());
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& rv = r.values();
    if (op == BinaryOp::Add) {
        for (std::size_t i = 0; i < av.size(); ++i) rv[i] = av[i] + bv[i];
    } else {
        for (std::size_t i = 0; i < av.size(); ++i) rv[i] = av[i] * bv[i];
    }
    return r;
}

Matrix broadcast_row_mul(const Matrix& a, const Matrix& v) {
    if (v.rows() != 1 || v.cols() != a.cols()) {
        throw std::invalid_argument("broadcast_row_mul: vector is " + shape_string(v) +
                                    ", matrix is " + shape_string(a));
    }
    Matrix r(a.rows(), a.cols());
    const double* vv = v.row_ptr(0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* in = a.row_ptr(i);
        double* out = r.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] = in[j] * vv[j];
    }
    return r;
}

Matrix scale_rows(const Matrix& a, std::span<const double> factors) {
    if (factors.size() != a.rows()) {
        throw std::invalid_argument("scale_rows: " + std::to_string(factors.size()) +
                                    " factors for matrix " + shape_string(a));
    }
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double f = factors[i];
        const double* in = a.row_ptr(i);
        double* out = r.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] = in[j] * f;
    }
    return r;
}

std::vector<double> row_sums(const Matrix& a) {
    std::vector<double> sums(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* in = a.row_ptr(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += in[j];
        sums[i] = acc;
    }
    return sums;
}

std::vector<double> column_sums(const Matrix& a) {
    std::vector<double> sums(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* in = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) sums[j] += in[j];
    }
    return sums;
}

Matrix slice_cols(const Matrix& a, std::size_t start, std::size_t count) {
    if (start + count > a.cols()) {
        throw std::invalid_argument("slice_cols: [" + std::to_string(start) + ", " +
                                    std::to_string(start + count) + ") out of " +
                                    shape_string(a));
    }
    Matrix r(a.rows(), count);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* in = a.row_ptr(i) + start;
        std::copy(in, in + count, r.row_ptr(i));
    }
    return r;
}

void paste_cols(Matrix& dst, const Matrix& src, std::size_t start) {
    if (src.rows() != dst.rows() || start + src.cols() > dst.cols()) {
        throw std::invalid_argument("paste_cols: " + shape_string(src) + " at column " +
                                    std::to_string(start) + " into " + shape_string(dst));
    }
    for (std::size_t i = 0; i < src.rows(); ++i) {
        std::copy(src.row_ptr(i), src.row_ptr(i) + src.cols(), dst.row_ptr(i) + start);
    }
}

Matrix slice_rows(const Matrix& a, std::size_t start, std::size_t count) {
    if (start + count > a.rows()) {
        throw std::invalid_argument("slice_rows: [" + std::to_string(start) + ", " +
                                    std::to_string(start + count) + ") out of " +
                                    shape_string(a));
    }
    Matrix r(count, a.cols());
    for (std::size_t i = 0; i < count; ++i) {
        std::copy(a.row_ptr(start + i), a.row_ptr(start + i) + a.cols(), r.row_ptr(i));
    }
    return r;
}

double max_abs(const Matrix& a) {
    double mx = 0.0;
    for (double v : a.values()) mx = std::max(mx, std::abs(v));
    return mx;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("max_abs_diff: shapes differ, a is " + shape_string(a) +
                                    ", b is " + shape_string(b));
    }
    double mx = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        mx = std::max(mx, std::abs(a.values()[i] - b.values()[i]));
    }
    return mx;
}

double relative_error(const Matrix& a, const Matrix& ref) {
    const double denom = std::max(max_abs(ref), 1e-300);
    return max_abs_diff(a, ref) / denom;
}

}  // namespace lmec
