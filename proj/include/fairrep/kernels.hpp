#pragma once

#include <vector>

#include "fairrep/tensor.hpp"

namespace fairrep::kernels {

/// Log-density of one point under a uniform mixture of diagonal Gaussians.
/// means/log_stds are M x d, z points at d doubles.
double mixture_log_prob_point(const Tensor& means, const Tensor& log_stds, const double* z);

/// Log-density of many points (rows of zs) under the mixture: the inner loop
/// of the KDE mutual-information estimators, O(N * M * d).
/// The serial variant is the reference implementation kept for testing; the
/// parallel variant distributes rows over OpenMP threads and must agree with
/// it bit-for-bit (each row is an independent reduction).
std::vector<double> mixture_log_prob_rows_serial(const Tensor& means, const Tensor& log_stds,
                                                 const Tensor& zs);
std::vector<double> mixture_log_prob_rows_parallel(const Tensor& means, const Tensor& log_stds,
                                                   const Tensor& zs);

/// Dispatches to the parallel variant when OpenMP is available.
std::vector<double> mixture_log_prob_rows(const Tensor& means, const Tensor& log_stds,
                                          const Tensor& zs);

/// C = A @ B, serial reference and OpenMP row-parallel version (used by the
/// batched eval forward passes).
Tensor matmul_serial(const Tensor& a, const Tensor& b);
Tensor matmul_parallel(const Tensor& a, const Tensor& b);

}  // namespace fairrep::kernels
