#pragma once

#include <vector>

#include "fairrep/tensor.hpp"

namespace fairrep {

/// Diagonal Gaussian over z, parameterized by mean and log standard deviation.
struct DiagGaussian {
    Tensor mean;     // 1 x d
    Tensor log_std;  // 1 x d

    int dim() const { return mean.cols(); }
    static DiagGaussian standard(int d) { return {Tensor(1, d), Tensor(1, d)}; }
};

/// Product of independent Bernoullis given by per-feature logits.
struct FactoredBernoulli {
    Tensor logits;  // 1 x d
};

/// Empirical distribution over discrete sensitive groups.
struct EmpiricalCategorical {
    Tensor probs;  // 1 x group_count
    int group_count = 0;

    double log_prob(int group) const;
    double entropy() const;  // nats
};

/// Uniform-weight mixture of diagonal Gaussians; the KDE-style marginal over
/// encoder posteriors at training points.
struct GaussianMixture {
    // component parameters, packed row-per-component
    Tensor means;     // M x d
    Tensor log_stds;  // M x d

    int components() const { return means.rows(); }
    int dim() const { return means.cols(); }
};

double gaussian_log_prob(const DiagGaussian& g, const Tensor& z);
double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);
Tensor reparameterize(const DiagGaussian& g, const Tensor& noise);
double bernoulli_log_prob(const FactoredBernoulli& b, const Tensor& x);
double mixture_log_prob(const GaussianMixture& m, const Tensor& z);
EmpiricalCategorical fit_empirical(const std::vector<int>& u_values, int group_count);

}  // namespace fairrep
