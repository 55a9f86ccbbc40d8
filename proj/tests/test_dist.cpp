#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairrep/dist.hpp"
#include "fairrep/rng.hpp"

using namespace fairrep;

namespace {

// independent quadrature oracle: Simpson integration of q log(q/p) for 1-d
// Gaussians q = N(mq, sq), p = N(mp, sp)
double kl_quadrature(double mq, double sq, double mp, double sp) {
    auto log_pdf = [](double x, double m, double s) {
        double d = (x - m) / s;
        return -0.5 * d * d - std::log(s) - 0.5 * std::log(2.0 * M_PI);
    };
    double lo = mq - 12.0 * sq, hi = mq + 12.0 * sq;
    int n = 40000;  // even
    double h = (hi - lo) / n, acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double x = lo + i * h;
        double f = std::exp(log_pdf(x, mq, sq)) * (log_pdf(x, mq, sq) - log_pdf(x, mp, sp));
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * f;
    }
    return acc * h / 3.0;
}

DiagGaussian make_gaussian(std::vector<double> mean, std::vector<double> log_std) {
    return {Tensor::row(std::move(mean)), Tensor::row(std::move(log_std))};
}

}  // namespace

TEST_CASE("gaussian log-density reference values") {
    DiagGaussian std1 = DiagGaussian::standard(1);
    CHECK(gaussian_log_prob(std1, Tensor::row({0.0})) ==
          doctest::Approx(-0.9189385332046727).epsilon(1e-12));
    // product over dimensions
    DiagGaussian std3 = DiagGaussian::standard(3);
    CHECK(gaussian_log_prob(std3, Tensor::row({0.0, 0.0, 0.0})) ==
          doctest::Approx(3 * -0.9189385332046727).epsilon(1e-12));
    // against the quadrature-free closed form at a shifted point
    DiagGaussian g = make_gaussian({1.0}, {std::log(2.0)});
    double d = (3.0 - 1.0) / 2.0;
    CHECK(gaussian_log_prob(g, Tensor::row({3.0})) ==
          doctest::Approx(-0.5 * d * d - std::log(2.0) - 0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("kl matches the quadrature oracle and is zero iff equal") {
    DiagGaussian q = make_gaussian({1.0}, {0.0});
    DiagGaussian p = DiagGaussian::standard(1);
    CHECK(gaussian_kl(q, p) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(gaussian_kl(q, p) == doctest::Approx(kl_quadrature(1, 1, 0, 1)).epsilon(1e-6));

    DiagGaussian q2 = make_gaussian({-0.3, 0.7}, {0.2, -0.5});
    DiagGaussian p2 = make_gaussian({0.1, 0.0}, {-0.1, 0.3});
    double expect = kl_quadrature(-0.3, std::exp(0.2), 0.1, std::exp(-0.1)) +
                    kl_quadrature(0.7, std::exp(-0.5), 0.0, std::exp(0.3));
    CHECK(gaussian_kl(q2, p2) == doctest::Approx(expect).epsilon(1e-6));

    CHECK(gaussian_kl(q2, q2) == 0.0);
    CHECK(gaussian_kl(q2, p2) > 0.0);
    CHECK(gaussian_kl(p2, q2) > 0.0);
}

TEST_CASE("monte carlo kl agrees with the analytic form within 3 SE") {
    DiagGaussian q = make_gaussian({0.8, -0.4}, {0.1, -0.3});
    DiagGaussian p = make_gaussian({0.0, 0.2}, {0.0, 0.1});
    const int n = 100000;
    RngStream rng(5);
    double sum = 0.0, sumsq = 0.0;
    Tensor noise(1, 2);
    for (int i = 0; i < n; ++i) {
        noise.at(0, 0) = rng.normal();
        noise.at(0, 1) = rng.normal();
        Tensor z = reparameterize(q, noise);
        double r = gaussian_log_prob(q, z) - gaussian_log_prob(p, z);
        sum += r;
        sumsq += r * r;
    }
    double mean = sum / n;
    double se = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean - gaussian_kl(q, p)) < 3.0 * se);
}

TEST_CASE("reparameterized samples have the right moments") {
    DiagGaussian q = make_gaussian({2.0}, {std::log(0.5)});
    const int n = 100000;
    RngStream rng(11);
    double sum = 0.0, sumsq = 0.0;
    Tensor noise(1, 1);
    for (int i = 0; i < n; ++i) {
        noise.at(0, 0) = rng.normal();
        double z = reparameterize(q, noise).item();
        sum += z;
        sumsq += z * z;
    }
    double mean = sum / n, var = sumsq / n - mean * mean;
    double se_mean = 0.5 / std::sqrt(n);
    CHECK(std::abs(mean - 2.0) < 3.0 * se_mean);
    CHECK(std::abs(var - 0.25) < 3.0 * 0.25 * std::sqrt(2.0 / n));
}

TEST_CASE("factored bernoulli log-probs normalize over all outcomes") {
    FactoredBernoulli b{Tensor::row({0.3, -1.2})};
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
        Tensor x = Tensor::row({static_cast<double>(i & 1), static_cast<double>(i >> 1)});
        total += std::exp(bernoulli_log_prob(b, x));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(bernoulli_log_prob(b, Tensor::row({0.5, 0.0})));
}

TEST_CASE("mixture density is invariant to component permutation and duplication") {
    GaussianMixture m;
    m.means = Tensor::from(2, 1, {-1.0, 2.0});
    m.log_stds = Tensor::from(2, 1, {0.0, -0.5});
    GaussianMixture perm;
    perm.means = Tensor::from(2, 1, {2.0, -1.0});
    perm.log_stds = Tensor::from(2, 1, {-0.5, 0.0});
    GaussianMixture dup;
    dup.means = Tensor::from(4, 1, {-1.0, 2.0, -1.0, 2.0});
    dup.log_stds = Tensor::from(4, 1, {0.0, -0.5, 0.0, -0.5});

    for (double z : {-2.0, 0.0, 0.7, 3.0}) {
        Tensor zt = Tensor::row({z});
        double ref = mixture_log_prob(m, zt);
        CHECK(mixture_log_prob(perm, zt) == doctest::Approx(ref).epsilon(1e-12));
        CHECK(mixture_log_prob(dup, zt) == doctest::Approx(ref).epsilon(1e-12));
    }

    // single-component mixture reduces to the plain Gaussian
    GaussianMixture one;
    one.means = Tensor::from(1, 1, {0.3});
    one.log_stds = Tensor::from(1, 1, {0.2});
    CHECK(mixture_log_prob(one, Tensor::row({1.0})) ==
          doctest::Approx(gaussian_log_prob(make_gaussian({0.3}, {0.2}), Tensor::row({1.0})))
              .epsilon(1e-12));
}

TEST_CASE("empirical categorical fits, validates, and reports entropy") {
    EmpiricalCategorical p = fit_empirical({0, 0, 0, 1}, 2);
    CHECK(p.probs.at(0, 0) == doctest::Approx(0.75));
    CHECK(p.log_prob(1) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    CHECK(p.entropy() == doctest::Approx(0.5623351446188083).epsilon(1e-12));
    CHECK(fit_empirical({0, 1}, 2).entropy() ==
          doctest::Approx(0.6931471805599453).epsilon(1e-12));

    CHECK_THROWS(fit_empirical({}, 2));
    CHECK_THROWS(fit_empirical({0, 2}, 2));
    CHECK_THROWS(fit_empirical({0, 0}, 1));
}
