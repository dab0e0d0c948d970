#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rosgas {

/// Dense row-major matrix of doubles. Vectors are 1-row matrices, scalars 1x1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("Tensor: negative shape");
    }

    static Tensor zeros(int r, int c) { return Tensor(r, c); }

    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }

    static Tensor row(const std::vector<double>& xs) {
        Tensor t(1, static_cast<int>(xs.size()));
        t.v = xs;
        return t;
    }

    static Tensor from_rows(const std::vector<std::vector<double>>& rows_in) {
        if (rows_in.empty()) return Tensor(0, 0);
        Tensor t(static_cast<int>(rows_in.size()), static_cast<int>(rows_in[0].size()));
        for (size_t i = 0; i < rows_in.size(); ++i) {
            if (rows_in[i].size() != rows_in[0].size())
                throw std::invalid_argument("Tensor::from_rows: ragged input");
            std::copy(rows_in[i].begin(), rows_in[i].end(), t.v.begin() + i * t.cols);
        }
        return t;
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::string shape_str() const {
        return "(" + std::to_string(rows) + "," + std::to_string(cols) + ")";
    }
};

/// c = a @ b
inline void matmul_into(const Tensor& a, const Tensor& b, Tensor& c) {
    // ikj order keeps the inner loop contiguous in both b and c.
    for (int i = 0; i < a.rows; ++i) {
        double* crow = &c.v[static_cast<size_t>(i) * c.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = &b.v[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " @ " + b.shape_str());
    Tensor c(a.rows, b.cols);
    matmul_into(a, b, c);
    return c;
}

}  // namespace rosgas
