#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stsg {

// Dense row-major 2-D array of doubles. The only numeric container in the
// project; vectors are 1xN or Nx1 tensors.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}
    Tensor(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
        if (v.size() != static_cast<size_t>(r) * c)
            throw std::invalid_argument("tensor data length does not match shape");
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_shape(const Tensor& t, int r, int c, const char* what) {
    if (t.rows != r || t.cols != c)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(r) + "x" +
                             std::to_string(c) + ", got " + shape_str(t));
}

// y = x * W^T (+ bias per row), the plain non-autodiff form.
inline Tensor matmul_nt(const Tensor& x, const Tensor& w) {
    if (x.cols != w.cols)
        throw DimensionError("matmul_nt: inner dims " + shape_str(x) + " vs " + shape_str(w));
    Tensor y(x.rows, w.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int o = 0; o < w.rows; ++o) {
            double s = 0;
            for (int k = 0; k < x.cols; ++k) s += x.at(i, k) * w.at(o, k);
            y.at(i, o) = s;
        }
    return y;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: inner dims " + shape_str(a) + " vs " + shape_str(b));
    Tensor y(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            double aik = a.at(i, k);
            if (aik == 0) continue;
            for (int j = 0; j < b.cols; ++j) y.at(i, j) += aik * b.at(k, j);
        }
    return y;
}

inline Tensor transpose(const Tensor& a) {
    Tensor y(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) y.at(j, i) = a.at(i, j);
    return y;
}

// Interleaved sin/cos positional encodings over geometric frequencies.
// Row p: [sin(p/10000^(0/d)), cos(p/10000^(0/d)), sin(p/10000^(2/d)), ...]
inline Tensor sinusoidal_pe(int length, int d) {
    if (d % 2 != 0) throw DimensionError("sinusoidal_pe: dimension must be even");
    Tensor pe(length, d);
    for (int p = 0; p < length; ++p)
        for (int k = 0; k < d / 2; ++k) {
            double freq = std::pow(10000.0, -2.0 * k / d);
            pe.at(p, 2 * k) = std::sin(p * freq);
            pe.at(p, 2 * k + 1) = std::cos(p * freq);
        }
    return pe;
}

}  // namespace stsg
