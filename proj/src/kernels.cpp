#include "fairrep/kernels.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fairrep::kernels {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// log N(z; mu_k, diag exp(2 s_k)) for component row k
inline double component_log_prob(const double* mu, const double* s, const double* z, int d) {
    double lp = 0.0;
    for (int i = 0; i < d; ++i) {
        double t = (z[i] - mu[i]) * std::exp(-s[i]);
        lp += -0.5 * kLogTwoPi - s[i] - 0.5 * t * t;
    }
    return lp;
}
}  // namespace

double mixture_log_prob_point(const Tensor& means, const Tensor& log_stds, const double* z) {
    const int M = means.rows();
    const int d = means.cols();
    // two passes: max then shifted sum, so huge negative exponents cannot underflow the result
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> lps(M);
    for (int k = 0; k < M; ++k) {
        lps[k] = component_log_prob(means.data() + static_cast<size_t>(k) * d,
                                    log_stds.data() + static_cast<size_t>(k) * d, z, d);
        if (lps[k] > mx) mx = lps[k];
    }
    double s = 0.0;
    for (int k = 0; k < M; ++k) s += std::exp(lps[k] - mx);
    return mx + std::log(s) - std::log(static_cast<double>(M));
}

std::vector<double> mixture_log_prob_rows_serial(const Tensor& means, const Tensor& log_stds,
                                                 const Tensor& zs) {
    if (!means.same_shape(log_stds)) throw std::invalid_argument("mixture kernel: means/log_stds shape mismatch");
    if (zs.cols() != means.cols()) throw std::invalid_argument("mixture kernel: point dimension mismatch");
    std::vector<double> out(zs.rows());
    for (int r = 0; r < zs.rows(); ++r)
        out[r] = mixture_log_prob_point(means, log_stds, zs.data() + static_cast<size_t>(r) * zs.cols());
    return out;
}

std::vector<double> mixture_log_prob_rows_parallel(const Tensor& means, const Tensor& log_stds,
                                                   const Tensor& zs) {
    if (!means.same_shape(log_stds)) throw std::invalid_argument("mixture kernel: means/log_stds shape mismatch");
    if (zs.cols() != means.cols()) throw std::invalid_argument("mixture kernel: point dimension mismatch");
    std::vector<double> out(zs.rows());
    const int n = zs.rows();
#pragma omp parallel for schedule(static)
    for (int r = 0; r < n; ++r)
        out[r] = mixture_log_prob_point(means, log_stds, zs.data() + static_cast<size_t>(r) * zs.cols());
    return out;
}

std::vector<double> mixture_log_prob_rows(const Tensor& means, const Tensor& log_stds,
                                          const Tensor& zs) {
#ifdef _OPENMP
    return mixture_log_prob_rows_parallel(means, log_stds, zs);
#else
    return mixture_log_prob_rows_serial(means, log_stds, zs);
#endif
}

Tensor matmul_serial(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Tensor out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            double aik = a.at(i, k);
            const double* brow = b.data() + static_cast<size_t>(k) * b.cols();
            double* orow = out.data() + static_cast<size_t>(i) * out.cols();
            for (int j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Tensor matmul_parallel(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Tensor out(a.rows(), b.cols());
    const int n = a.rows();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            double aik = a.at(i, k);
            const double* brow = b.data() + static_cast<size_t>(k) * b.cols();
            double* orow = out.data() + static_cast<size_t>(i) * out.cols();
            for (int j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

}  // namespace fairrep::kernels
