#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairrep/kernels.hpp"
#include "fairrep/rng.hpp"

using namespace fairrep;

namespace {

Tensor random_tensor(int rows, int cols, RngStream& rng) {
    Tensor t(rows, cols);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("mixture point density matches a naive small-scale evaluation") {
    // 3 components, 2 dims: naive mean of exp densities is safe at this scale
    Tensor means = Tensor::from(3, 2, {0.0, 0.0, 1.0, -1.0, -0.5, 0.5});
    Tensor lstds = Tensor::from(3, 2, {0.0, 0.1, -0.2, 0.0, 0.3, -0.1});
    double z[2] = {0.4, -0.3};

    double naive = 0.0;
    for (int m = 0; m < 3; ++m) {
        double lp = 0.0;
        for (int c = 0; c < 2; ++c) {
            double s = std::exp(lstds.at(m, c));
            double d = (z[c] - means.at(m, c)) / s;
            lp += -0.5 * d * d - std::log(s) - 0.5 * std::log(2.0 * M_PI);
        }
        naive += std::exp(lp) / 3.0;
    }
    CHECK(kernels::mixture_log_prob_point(means, lstds, z) ==
          doctest::Approx(std::log(naive)).epsilon(1e-12));
}

TEST_CASE("serial and parallel mixture kernels agree bit-for-bit") {
    RngStream rng(99);
    Tensor means = random_tensor(257, 6, rng);
    Tensor lstds = random_tensor(257, 6, rng);
    for (size_t i = 0; i < lstds.size(); ++i) lstds[i] *= 0.3;
    Tensor zs = random_tensor(403, 6, rng);

    std::vector<double> a = kernels::mixture_log_prob_rows_serial(means, lstds, zs);
    std::vector<double> b = kernels::mixture_log_prob_rows_parallel(means, lstds, zs);
    std::vector<double> c = kernels::mixture_log_prob_rows(means, lstds, zs);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
        CHECK(a[i] == c[i]);
    }
}

TEST_CASE("serial and parallel matmul agree bit-for-bit") {
    RngStream rng(7);
    Tensor a = random_tensor(65, 33, rng);
    Tensor b = random_tensor(33, 41, rng);
    Tensor s = kernels::matmul_serial(a, b);
    Tensor p = kernels::matmul_parallel(a, b);
    REQUIRE(s.same_shape(p));
    for (size_t i = 0; i < s.size(); ++i) CHECK(s[i] == p[i]);

    // identity sanity
    Tensor eye(3, 3);
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Tensor m = random_tensor(3, 3, rng);
    Tensor r = kernels::matmul_serial(m, eye);
    for (size_t i = 0; i < m.size(); ++i) CHECK(r[i] == m[i]);
}
