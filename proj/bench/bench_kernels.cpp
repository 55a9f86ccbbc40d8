// Timing harness for the two hot kernels: the mixture log-density used by
// the mutual-information estimators and the dense matmul behind the batched
// forward passes. Prints serial vs parallel wall time and verifies that the
// parallel variants agree with the serial references bit-for-bit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "fairrep/kernels.hpp"
#include "fairrep/rng.hpp"
#include "fairrep/tensor.hpp"

using namespace fairrep;

namespace {

template <typename F>
double time_best_of(int repeats, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main() {
    RngStream rng(12345);

    {
        int m = 2000, n = 4000, d = 10;
        Tensor means = rng.normal_tensor(m, d);
        Tensor log_stds = rng.normal_tensor(m, d);
        for (size_t i = 0; i < log_stds.size(); ++i) log_stds[i] *= 0.3;
        Tensor zs = rng.normal_tensor(n, d);

        std::vector<double> serial, parallel;
        double ts = time_best_of(3, [&] {
            serial = kernels::mixture_log_prob_rows_serial(means, log_stds, zs);
        });
        double tp = time_best_of(3, [&] {
            parallel = kernels::mixture_log_prob_rows_parallel(means, log_stds, zs);
        });
        bool same = serial == parallel;
        std::printf("mixture_log_prob_rows  M=%d N=%d d=%d   serial %.3fs  parallel %.3fs  "
                    "speedup %.2fx  bitwise-equal %s\n",
                    m, n, d, ts, tp, ts / tp, same ? "yes" : "NO");
        if (!same) return 1;
    }

    {
        int n = 512, k = 512, m = 512;
        Tensor a = rng.normal_tensor(n, k);
        Tensor b = rng.normal_tensor(k, m);
        Tensor cs(1, 1), cp(1, 1);
        double ts = time_best_of(3, [&] { cs = kernels::matmul_serial(a, b); });
        double tp = time_best_of(3, [&] { cp = kernels::matmul_parallel(a, b); });
        bool same = cs.rows() == cp.rows() && cs.cols() == cp.cols();
        if (same)
            for (size_t i = 0; i < cs.size(); ++i) same = same && cs[i] == cp[i];
        std::printf("matmul                 %dx%dx%d          serial %.3fs  parallel %.3fs  "
                    "speedup %.2fx  bitwise-equal %s\n",
                    n, k, m, ts, tp, ts / tp, same ? "yes" : "NO");
        if (!same) return 1;
    }

    return 0;
}
