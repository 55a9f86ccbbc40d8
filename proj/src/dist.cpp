#include "fairrep/dist.hpp"

#include <cmath>
#include <stdexcept>

#include "fairrep/activations.hpp"
#include "fairrep/kernels.hpp"

namespace fairrep {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void check_dim(const DiagGaussian& g, const Tensor& z, const char* op) {
    if (z.size() != static_cast<size_t>(g.dim()))
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}
}  // namespace

double EmpiricalCategorical::log_prob(int group) const {
    if (group < 0 || group >= group_count)
        throw std::invalid_argument("EmpiricalCategorical::log_prob: group out of range");
    return std::log(probs[group]);
}

double EmpiricalCategorical::entropy() const {
    double h = 0.0;
    for (int k = 0; k < group_count; ++k)
        if (probs[k] > 0.0) h -= probs[k] * std::log(probs[k]);
    return h;
}

double gaussian_log_prob(const DiagGaussian& g, const Tensor& z) {
    check_dim(g, z, "gaussian_log_prob");
    double lp = 0.0;
    for (int i = 0; i < g.dim(); ++i) {
        double s = g.log_std[i];
        double t = (z[i] - g.mean[i]) * std::exp(-s);
        lp += -0.5 * kLogTwoPi - s - 0.5 * t * t;
    }
    return lp;
}

double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
    if (q.dim() != p.dim()) throw std::invalid_argument("gaussian_kl: dimension mismatch");
    double kl = 0.0;
    for (int i = 0; i < q.dim(); ++i) {
        double dls = q.log_std[i] - p.log_std[i];
        double var_ratio = std::exp(2.0 * dls);
        double dm = (q.mean[i] - p.mean[i]) * std::exp(-p.log_std[i]);
        kl += 0.5 * (var_ratio + dm * dm - 1.0) - dls;
    }
    return kl;
}

Tensor reparameterize(const DiagGaussian& g, const Tensor& noise) {
    check_dim(g, noise, "reparameterize");
    Tensor z(1, g.dim());
    for (int i = 0; i < g.dim(); ++i) z[i] = g.mean[i] + std::exp(g.log_std[i]) * noise[i];
    return z;
}

double bernoulli_log_prob(const FactoredBernoulli& b, const Tensor& x) {
    if (x.size() != b.logits.size())
        throw std::invalid_argument("bernoulli_log_prob: dimension mismatch");
    double lp = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0 && x[i] != 1.0)
            throw std::invalid_argument("bernoulli_log_prob: entries must be 0 or 1");
        // x*l - softplus(l): equals log sigma(l) at x=1, log(1-sigma(l)) at x=0
        lp += x[i] * b.logits[i] - softplus(b.logits[i]);
    }
    return lp;
}

double mixture_log_prob(const GaussianMixture& m, const Tensor& z) {
    if (m.components() == 0) throw std::invalid_argument("mixture_log_prob: empty mixture");
    if (z.size() != static_cast<size_t>(m.dim()))
        throw std::invalid_argument("mixture_log_prob: dimension mismatch");
    return kernels::mixture_log_prob_point(m.means, m.log_stds, z.data());
}

EmpiricalCategorical fit_empirical(const std::vector<int>& u_values, int group_count) {
    if (u_values.empty()) throw std::invalid_argument("fit_empirical: empty input");
    if (group_count < 2) throw std::invalid_argument("fit_empirical: need at least 2 groups");
    EmpiricalCategorical e;
    e.group_count = group_count;
    e.probs = Tensor(1, group_count);
    for (int u : u_values) {
        if (u < 0 || u >= group_count) throw std::invalid_argument("fit_empirical: id out of range");
        e.probs[u] += 1.0;
    }
    for (int k = 0; k < group_count; ++k) e.probs[k] /= static_cast<double>(u_values.size());
    return e;
}

}  // namespace fairrep
