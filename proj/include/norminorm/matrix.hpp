#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "norminorm/errors.hpp"

namespace norminorm {

/// Dense row-major square matrix. Diagnostics only: the training path never
/// materializes matrices, so this stays deliberately tiny (no BLAS, no views).
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

    static SquareMatrix identity(std::size_t n) {
        SquareMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t size() const noexcept { return n_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    std::span<const double> data() const noexcept { return a_; }

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

/// Dense row-major rectangular matrix; the feature container for datasets
/// and mini-batches.
class RowMatrix {
public:
    RowMatrix() = default;
    RowMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return a_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(a_).subspan(r * cols_, cols_);
    }

    std::span<const double> data() const noexcept { return a_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> a_;
};

inline SquareMatrix matmul(const SquareMatrix& x, const SquareMatrix& y) {
    if (x.size() != y.size()) {
        throw DimensionMismatch("matmul needs equal-sized square matrices");
    }
    const std::size_t n = x.size();
    SquareMatrix out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const double xik = x(i, k);
            if (xik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += xik * y(k, j);
        }
    }
    return out;
}

inline std::vector<double> matvec(const SquareMatrix& m, std::span<const double> v) {
    if (m.size() != v.size()) {
        throw DimensionMismatch("matvec needs matching matrix and vector sizes");
    }
    const std::size_t n = m.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

/// v^T M v.
inline double quadratic_form(const SquareMatrix& m, std::span<const double> v) {
    const std::vector<double> mv = matvec(m, v);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * mv[i];
    return s;
}

}  // namespace norminorm
