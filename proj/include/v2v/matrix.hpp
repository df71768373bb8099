#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "v2v/errors.hpp"
#include "v2v/rng.hpp"

namespace v2v {

/// Dense row-major double matrix. All model math runs in float64; tensors are
/// narrowed to float32 only at checkpoint/hash boundaries.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) fail(ErrorKind::dimension, "negative matrix shape");
        data_.assign(static_cast<size_t>(rows) * cols, fill);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    const double& at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline void require_shape(const Matrix& m, int rows, int cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols)
        fail(ErrorKind::dimension, std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                       std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                                       "x" + std::to_string(m.cols()));
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        fail(ErrorKind::dimension, "matmul: " + std::to_string(a.rows()) + "x" +
                                       std::to_string(a.cols()) + " times " +
                                       std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < a.cols(); ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols(); ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// a * transpose(b); rows of b are the "keys".
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        fail(ErrorKind::dimension, "matmul_nt: inner dims " + std::to_string(a.cols()) + " vs " +
                                       std::to_string(b.cols()));
    Matrix c(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (int j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            c.at(i, j) = s;
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) fail(ErrorKind::dimension, "add: shape mismatch");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) fail(ErrorKind::dimension, "sub: shape mismatch");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

inline Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) fail(ErrorKind::dimension, "hadamard: shape mismatch");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
    return c;
}

inline void add_row_inplace(Matrix& a, const Matrix& row_vec) {
    if (row_vec.rows() != 1 || row_vec.cols() != a.cols())
        fail(ErrorKind::dimension, "add_row_inplace: need 1x" + std::to_string(a.cols()));
    for (int i = 0; i < a.rows(); ++i) {
        double* r = a.row(i);
        for (int j = 0; j < a.cols(); ++j) r[j] += row_vec.at(0, j);
    }
}

inline Matrix take_rows(const Matrix& a, const std::vector<int>& indices) {
    Matrix c(static_cast<int>(indices.size()), a.cols());
    for (size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || r >= a.rows()) fail(ErrorKind::range, "take_rows: index out of range");
        std::memcpy(c.row(static_cast<int>(i)), a.row(r), sizeof(double) * a.cols());
    }
    return c;
}

inline Matrix slice_rows(const Matrix& a, int r0, int r1) {
    if (r0 < 0 || r1 > a.rows() || r0 > r1) fail(ErrorKind::range, "slice_rows: bad range");
    Matrix c(r1 - r0, a.cols());
    if (r1 > r0)
        std::memcpy(c.row(0), a.row(r0), sizeof(double) * static_cast<size_t>(r1 - r0) * a.cols());
    return c;
}

inline Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.cols() != b.cols()) fail(ErrorKind::dimension, "vstack: column mismatch");
    Matrix c(a.rows() + b.rows(), a.cols());
    std::memcpy(c.row(0), a.row(0), sizeof(double) * a.size());
    std::memcpy(c.row(a.rows()), b.row(0), sizeof(double) * b.size());
    return c;
}

/// Row-wise softmax in place. Masked entries should already hold a very
/// negative logit; exp underflows them to exactly zero.
inline void softmax_rows_inplace(Matrix& m) {
    for (int i = 0; i < m.rows(); ++i) {
        double* r = m.row(i);
        double mx = r[0];
        for (int j = 1; j < m.cols(); ++j) mx = std::max(mx, r[j]);
        double sum = 0.0;
        for (int j = 0; j < m.cols(); ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (int j = 0; j < m.cols(); ++j) r[j] /= sum;
    }
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) fail(ErrorKind::dimension, "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

/// Largest elementwise relative error, |a-b| / max(|a|,|b|,floor).
inline double max_rel_diff(const Matrix& a, const Matrix& b, double floor_val = 1e-8) {
    if (!a.same_shape(b)) fail(ErrorKind::dimension, "max_rel_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double x = a.data()[i], y = b.data()[i];
        const double denom = std::max({std::abs(x), std::abs(y), floor_val});
        m = std::max(m, std::abs(x - y) / denom);
    }
    return m;
}

inline Matrix random_gaussian(int rows, int cols, uint64_t seed, double std_dev) {
    Matrix m(rows, cols);
    GaussianRng rng(seed);
    for (double& v : m.data()) v = rng.normal() * std_dev;
    return m;
}

/// Canonical content hash: every value narrowed to float32, hashed as
/// little-endian bytes with FNV-1a 64. Stable across build modes.
inline uint64_t matrix_hash(const Matrix& m) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](uint32_t word) {
        for (int i = 0; i < 4; ++i) {
            h ^= (word >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<uint32_t>(m.rows()));
    mix(static_cast<uint32_t>(m.cols()));
    for (double v : m.data()) {
        const float f = static_cast<float>(v);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        mix(bits);
    }
    return h;
}

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) fail(ErrorKind::dimension, "cosine: length mismatch");
    const double na = norm(a.data(), static_cast<int>(a.size()));
    const double nb = norm(b.data(), static_cast<int>(b.size()));
    if (na == 0.0 || nb == 0.0) fail(ErrorKind::degenerate_input, "cosine: zero-norm vector");
    return dot(a.data(), b.data(), static_cast<int>(a.size())) / (na * nb);
}

inline std::vector<double> mean_rows(const Matrix& m) {
    if (m.rows() == 0) fail(ErrorKind::degenerate_input, "mean_rows: empty matrix");
    std::vector<double> out(m.cols(), 0.0);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out[j] += m.at(i, j);
    for (double& v : out) v /= m.rows();
    return out;
}

}  // namespace v2v
