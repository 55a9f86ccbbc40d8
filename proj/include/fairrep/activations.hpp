#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "fairrep/tensor.hpp"

namespace fairrep {

inline double softplus(double x) {
    // softplus(x) = log(1 + e^x), computed from the non-overflowing branch
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// Shift-invariant log(sum exp(x_i)).
inline double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

enum class Activation { Softplus, Sigmoid, LogSumExp };

/// Elementwise softplus/sigmoid over a tensor, or log_sum_exp reducing each
/// row to a single column.
inline Tensor stable_activations(const Tensor& x, Activation kind) {
    if (kind == Activation::LogSumExp) {
        Tensor out(x.rows(), 1);
        for (int r = 0; r < x.rows(); ++r)
            out.at(r, 0) = log_sum_exp(std::span<const double>(x.data() + static_cast<size_t>(r) * x.cols(), x.cols()));
        return out;
    }
    Tensor out(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = kind == Activation::Softplus ? softplus(x[i]) : sigmoid(x[i]);
    return out;
}

}  // namespace fairrep
