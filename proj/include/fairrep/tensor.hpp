#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairrep {

/// Dense 2-d tensor of doubles, row-major. Scalars are 1x1, row vectors 1xn.
class Tensor {
public:
    Tensor() = default;

    Tensor(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
    }

    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v_[0] = x;
        return t;
    }

    static Tensor row(std::vector<double> values) {
        Tensor t;
        t.rows_ = 1;
        t.cols_ = static_cast<int>(values.size());
        t.v_ = std::move(values);
        return t;
    }

    static Tensor from(int rows, int cols, std::vector<double> values) {
        if (static_cast<size_t>(rows) * cols != values.size())
            throw std::invalid_argument("Tensor::from: data length does not match shape");
        Tensor t;
        t.rows_ = rows;
        t.cols_ = cols;
        t.v_ = std::move(values);
        return t;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& at(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return v_[static_cast<size_t>(r) * cols_ + c]; }
    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    /// Value of a 1x1 tensor.
    double item() const {
        if (size() != 1) throw std::logic_error("Tensor::item on non-scalar");
        return v_[0];
    }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    void require_finite(const char* what) const {
        if (!all_finite()) throw std::runtime_error(std::string("non-finite values in ") + what);
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

inline bool operator==(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace fairrep
