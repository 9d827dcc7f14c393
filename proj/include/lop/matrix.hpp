#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lop {

// Dense row-major matrix of doubles. Small on purpose: the models in this
// project are fixed two-layer architectures, so a handful of kernels is all
// that is needed.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows && c < cols);
        return v[r * cols + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows && c < cols);
        return v[r * cols + c];
    }

    std::size_t size() const { return v.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

inline bool all_finite(const Matrix& a) {
    for (double x : a.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace lop
