#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace thg {

// Dense row-major matrix of doubles. Column vectors are (n x 1).
struct Tensor2 {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Tensor2: negative shape");
    }

    static Tensor2 vec(std::vector<double> v) {
        Tensor2 t;
        t.rows = static_cast<int>(v.size());
        t.cols = 1;
        t.data = std::move(v);
        return t;
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }
    size_t size() const { return data.size(); }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline std::string shape_str(const Tensor2& t) {
    return "(" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + ")";
}

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(a) + " * " + shape_str(b));
    Tensor2 out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + static_cast<size_t>(i) * a.cols;
        double* orow = out.data.data() + static_cast<size_t>(i) * b.cols;
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + static_cast<size_t>(k) * b.cols;
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline Tensor2 add(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("add: shape mismatch " + shape_str(a) + " + " + shape_str(b));
    Tensor2 out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Tensor2 sub(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("sub: shape mismatch " + shape_str(a) + " - " + shape_str(b));
    Tensor2 out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

inline Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("hadamard: shape mismatch " + shape_str(a) + " . " + shape_str(b));
    Tensor2 out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

inline Tensor2 scale(const Tensor2& a, double s) {
    Tensor2 out = a;
    for (double& v : out.data) v *= s;
    return out;
}

template <class F>
Tensor2 map(const Tensor2& a, F f) {
    Tensor2 out = a;
    for (double& v : out.data) v = f(v);
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor2 concat_rows(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.cols)
        throw std::invalid_argument("concat_rows: column mismatch " + shape_str(a) + " | " + shape_str(b));
    Tensor2 out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

inline double max_norm(const Tensor2& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

inline double l2_norm(const Tensor2& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

inline double l2_dist(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("l2_dist: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double max_dist(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_dist: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace thg
