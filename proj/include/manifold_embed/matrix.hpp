#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "manifold_embed/errors.hpp"

namespace manifold_embed {

// Dense row-major matrix of 64-bit floats. The single numeric container for
// embeddings, weights, and gradients. Public kernels keep every entry finite;
// a NaN/Inf result throws instead of propagating.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ConfigError("Matrix: data length " + std::to_string(data_.size()) +
                              " does not equal " + std::to_string(rows_) + "x" +
                              std::to_string(cols_));
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ConfigError("Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void ensure_finite(const char* what) const {
        if (!all_finite()) throw NumericError(std::string(what) + ": non-finite entry");
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

// Normalization below this is numerically meaningless; error instead of
// returning garbage.
inline constexpr double kNormEpsilon = 1e-12;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ConfigError("matmul: dimension mismatch " + a.shape_str() + " x " +
                          b.shape_str());
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = arow[k];
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    out.ensure_finite("matmul");
    return out;
}

// Column means collapsed to a single row (the mean-pooling kernel).
inline Matrix mean_rows(const Matrix& m) {
    if (m.rows() == 0) throw ConfigError("mean_rows: empty pooling window (0 rows)");
    Matrix out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(m.rows());
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] *= inv;
    out.ensure_finite("mean_rows");
    return out;
}

inline double l2_norm(const double* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

inline double l2_norm(const Matrix& m) { return l2_norm(m.data().data(), m.size()); }

inline Matrix l2_normalize_row(const Matrix& v) {
    if (v.rows() != 1)
        throw ConfigError("l2_normalize_row: expected a 1x d row, got " + v.shape_str());
    const double norm = l2_norm(v);
    if (!(norm > kNormEpsilon))
        throw NumericError("l2_normalize_row: degenerate vector (norm " +
                           std::to_string(norm) + " <= 1e-12)");
    Matrix out(1, v.cols());
    for (std::size_t j = 0; j < v.cols(); ++j) out[j] = v[j] / norm;
    return out;
}

inline Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

}  // namespace manifold_embed
