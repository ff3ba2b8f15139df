#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "esrnn/errors.hpp"

namespace esrnn {

/// Dense row-major matrix of doubles. The only container the tape and the
/// network operate on; a column vector is (n, 1), a scalar is (1, 1).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
        std::size_t r = 0;
        for (const auto& row : rows) {
            if (row.size() != m.cols_)
                throw ShapeError("from_rows: ragged initializer");
            std::size_t c = 0;
            for (double v : row) m(r, c++) = v;
            ++r;
        }
        return m;
    }

    static Matrix column(const std::vector<double>& v) {
        Matrix m(v.size(), 1);
        m.data_ = v;
        return m;
    }

    static Matrix adopt(std::size_t rows, std::size_t cols, std::vector<double>&& buffer) {
        Matrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_ = std::move(buffer);
        return m;
    }

    std::vector<double> release() {
        rows_ = cols_ = 0;
        return std::move(data_);
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return "(" + std::to_string(rows_) + ", " + std::to_string(cols_) + ")";
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

/// out += a * b, four output rows per pass so each b row load is reused. Every
/// output element accumulates its k terms in index order and rows never mix,
/// so results are bit-reproducible for any batch composition (appending
/// all-zero rows to `a` leaves existing rows bit-identical).
inline void matmul_accum(Matrix& out, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions " + a.shape_str() + " vs " + b.shape_str());
    const std::size_t m = a.rows(), kk = a.cols(), n = b.cols();
    if (out.rows() != m || out.cols() != n) throw ShapeError("matmul: output shape");
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        double* __restrict__ c0 = out.row(i);
        double* __restrict__ c1 = out.row(i + 1);
        double* __restrict__ c2 = out.row(i + 2);
        double* __restrict__ c3 = out.row(i + 3);
        const double* a0 = a.row(i);
        const double* a1 = a.row(i + 1);
        const double* a2 = a.row(i + 2);
        const double* a3 = a.row(i + 3);
        for (std::size_t k = 0; k < kk; ++k) {
            const double* __restrict__ br = b.row(k);
            const double f0 = a0[k], f1 = a1[k], f2 = a2[k], f3 = a3[k];
            for (std::size_t j = 0; j < n; ++j) {
                const double bv = br[j];
                c0[j] += f0 * bv;
                c1[j] += f1 * bv;
                c2[j] += f2 * bv;
                c3[j] += f3 * bv;
            }
        }
    }
    for (; i < m; ++i) {
        double* __restrict__ c = out.row(i);
        const double* ar = a.row(i);
        for (std::size_t k = 0; k < kk; ++k) {
            const double* __restrict__ br = b.row(k);
            const double f = ar[k];
            for (std::size_t j = 0; j < n; ++j) c[j] += f * br[j];
        }
    }
}

inline void matmul_into(Matrix& out, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions " + a.shape_str() + " vs " + b.shape_str());
    out = Matrix(a.rows(), b.cols());
    matmul_accum(out, a, b);
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out;
    matmul_into(out, a, b);
    return out;
}

/// out += a * b^T (matmul adjoint dA = dC * B^T).
inline void matmul_nt_accum(Matrix& out, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: inner dimensions " + a.shape_str() + " vs " + b.shape_str());
    matmul_accum(out, a, transpose(b));
}

/// out += a^T * b (matmul adjoint dB = A^T * dC). The contraction runs over
/// the batch dimension in index order, so appended all-zero batch rows only
/// add trailing zero terms.
inline void matmul_tn_accum(Matrix& out, const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_tn: inner dimensions " + a.shape_str() + " vs " + b.shape_str());
    matmul_accum(out, transpose(a), b);
}

/// Deterministic random source. All draws are explicit bit manipulations of
/// the mt19937_64 stream, so sequences are identical across platforms and
/// standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace esrnn
