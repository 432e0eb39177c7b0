#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pdfd/tensor.hpp"

namespace pdfd::ops {

/// Inputs to the clamped natural log are floored at this value so that
/// log(1 - D) stays finite when a discriminator saturates.
inline constexpr double kLogFloor = 1e-12;

/// y = x * w + b, with x [n, din] (or [din] as one row), w [din, dout],
/// b [dout] broadcast over rows.
inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int n = x.rows(), din = x.cols();
    const int dout = w.cols();
    if (w.rank() != 2 || w.shape()[0] != din)
        throw ShapeError("affine: weight shape " + w.shape_str() +
                         " incompatible with input " + x.shape_str());
    if (b.rank() != 1 || b.shape()[0] != dout)
        throw ShapeError("affine: bias shape " + b.shape_str() + " expected [" +
                         std::to_string(dout) + "]");
    Tensor y(x.rank() == 1 ? std::vector<int>{dout} : std::vector<int>{n, dout});
    const double* xp = x.data();
    const double* wp = w.data();
    double* yp = y.data();
    for (int i = 0; i < n; ++i) {
        double* yrow = yp + static_cast<std::size_t>(i) * dout;
        for (int j = 0; j < dout; ++j) yrow[j] = b[j];
        const double* xrow = xp + static_cast<std::size_t>(i) * din;
        for (int k = 0; k < din; ++k) {
            const double xv = xrow[k];
            const double* wrow = wp + static_cast<std::size_t>(k) * dout;
            for (int j = 0; j < dout; ++j) yrow[j] += xv * wrow[j];
        }
    }
    return y;
}

/// Gradients of affine: g is d(loss)/dy with y's shape.
inline void affine_backward(const Tensor& x, const Tensor& w, const Tensor& g,
                            Tensor& dx, Tensor& dw, Tensor& db) {
    const int n = x.rows(), din = x.cols(), dout = w.cols();
    const double* xp = x.data();
    const double* wp = w.data();
    const double* gp = g.data();
    for (int i = 0; i < n; ++i) {
        const double* grow = gp + static_cast<std::size_t>(i) * dout;
        const double* xrow = xp + static_cast<std::size_t>(i) * din;
        double* dxrow = dx.data() + static_cast<std::size_t>(i) * din;
        for (int k = 0; k < din; ++k) {
            const double* wrow = wp + static_cast<std::size_t>(k) * dout;
            double acc = 0.0;
            for (int j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
            dxrow[k] += acc;
            double* dwrow = dw.data() + static_cast<std::size_t>(k) * dout;
            const double xv = xrow[k];
            for (int j = 0; j < dout; ++j) dwrow[j] += xv * grow[j];
        }
        for (int j = 0; j < dout; ++j) db[j] += grow[j];
    }
}

/// Elementwise alpha*a + beta*b on same-shaped tensors.
inline Tensor axpby(double alpha, const Tensor& a, double beta, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("add: shapes " + a.shape_str() + " vs " + b.shape_str());
    Tensor y = Tensor::zeros_like(a);
    for (int i = 0; i < a.size(); ++i) y[i] = alpha * a[i] + beta * b[i];
    return y;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("mul: shapes " + a.shape_str() + " vs " + b.shape_str());
    Tensor y = Tensor::zeros_like(a);
    for (int i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
    return y;
}

// Subgradient at the ReLU kink is 0.
inline Tensor relu(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    for (int i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

inline Tensor tanh(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    for (int i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    return y;
}

inline Tensor sigmoid(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    for (int i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return y;
}

/// Natural log with the input clamped to >= kLogFloor. The gradient is 0
/// wherever the clamp is active.
inline Tensor clamped_log(const Tensor& x) {
    Tensor y = Tensor::zeros_like(x);
    for (int i = 0; i < x.size(); ++i) y[i] = std::log(std::max(x[i], kLogFloor));
    return y;
}

/// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& logits) {
    const int n = logits.rows(), c = logits.cols();
    Tensor p = Tensor::zeros_like(logits);
    for (int i = 0; i < n; ++i) {
        const double* z = logits.data() + static_cast<std::size_t>(i) * c;
        double* q = p.data() + static_cast<std::size_t>(i) * c;
        double m = z[0];
        for (int j = 1; j < c; ++j) m = std::max(m, z[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            q[j] = std::exp(z[j] - m);
            sum += q[j];
        }
        for (int j = 0; j < c; ++j) q[j] /= sum;
    }
    return p;
}

/// Mean over rows of softmax cross-entropy, fused via log-sum-exp.
inline double softmax_xent_mean(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.rows(), c = logits.cols();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* z = logits.data() + static_cast<std::size_t>(i) * c;
        double m = z[0];
        for (int j = 1; j < c; ++j) m = std::max(m, z[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(z[j] - m);
        total += m + std::log(sum) - z[labels[static_cast<std::size_t>(i)]];
    }
    return total / n;
}

/// d/dlogits of softmax_xent_mean, scaled by the incoming scalar gradient.
inline void softmax_xent_backward(const Tensor& logits, const std::vector<int>& labels,
                                  double g, Tensor& dlogits) {
    const int n = logits.rows(), c = logits.cols();
    Tensor p = softmax_rows(logits);
    const double scale = g / n;
    for (int i = 0; i < n; ++i) {
        double* drow = dlogits.data() + static_cast<std::size_t>(i) * c;
        const double* prow = p.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) drow[j] += scale * prow[j];
        drow[labels[static_cast<std::size_t>(i)]] -= scale;
    }
}

/// Sum of squares over all entries.
inline double sqnorm(const Tensor& x) {
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) s += x[i] * x[i];
    return s;
}

inline double sum_all(const Tensor& x) {
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) s += x[i];
    return s;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Tensor& x) { return std::sqrt(sqnorm(x)); }

} // namespace pdfd::ops
