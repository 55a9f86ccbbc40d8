#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairrep/activations.hpp"
#include "fairrep/optim.hpp"
#include "fairrep/rng.hpp"
#include "fairrep/tape.hpp"
#include "fd_check.hpp"

using namespace fairrep;
using fairrep::testing::GraphBuild;
using fairrep::testing::max_grad_rel_err;

namespace {

Tensor random_tensor(int rows, int cols, RngStream& rng) {
    Tensor t(rows, cols);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor t = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.at(1, 2) == 6.0);
    CHECK(Tensor::scalar(3.5).item() == 3.5);
    CHECK_THROWS(Tensor::from(2, 2, {1, 2, 3}));
    CHECK_THROWS(t.item());
    Tensor bad = Tensor::scalar(std::nan(""));
    CHECK_FALSE(bad.all_finite());
    CHECK_THROWS(bad.require_finite("test"));
}

TEST_CASE("gradients of every primitive op match finite differences") {
    RngStream rng(12);
    auto check = [&](const char* name, testing::Builder build, std::vector<Tensor> inputs) {
        INFO(name);
        CHECK(max_grad_rel_err(build, inputs) < 1e-5);
    };

    check("matmul+add+sub+mul chain",
          [](const std::vector<Tensor>& in) {
              GraphBuild g;
              int a = g.tape.leaf(in[0]);
              int b = g.tape.leaf(in[1]);
              int c = g.tape.leaf(in[2]);
              int mm = g.tape.matmul(a, b);
              int s = g.tape.mul(g.tape.sub(mm, c), g.tape.add(mm, c));
              g.loss = g.tape.mean_all(s);
              g.leaves = {a, b, c};
              return g;
          },
          {random_tensor(3, 4, rng), random_tensor(4, 2, rng), random_tensor(3, 2, rng)});

    check("softplus/sigmoid/exp/scale/add_const",
          [](const std::vector<Tensor>& in) {
              GraphBuild g;
              int a = g.tape.leaf(in[0]);
              int x = g.tape.softplus(g.tape.scale(a, 1.3));
              int y = g.tape.sigmoid(g.tape.add_const(a, -0.2));
              int z = g.tape.exp(g.tape.scale(a, 0.5));
              g.loss = g.tape.mean_all(g.tape.add(g.tape.mul(x, y), z));
              g.leaves = {a};
              return g;
          },
          {random_tensor(3, 3, rng)});

    check("add_rowvec + concat_cols",
          [](const std::vector<Tensor>& in) {
              GraphBuild g;
              int a = g.tape.leaf(in[0]);
              int b = g.tape.leaf(in[1]);
              int c = g.tape.leaf(in[2]);
              int h = g.tape.add_rowvec(a, b);
              g.loss = g.tape.mean_all(g.tape.mul(g.tape.concat_cols(h, c),
                                                  g.tape.concat_cols(c, h)));
              g.leaves = {a, b, c};
              return g;
          },
          {random_tensor(4, 2, rng), random_tensor(1, 2, rng), random_tensor(4, 2, rng)});

    check("log_sum_exp + gather_cols + mul_const + sum_all",
          [](const std::vector<Tensor>& in) {
              GraphBuild g;
              int a = g.tape.leaf(in[0]);
              int lse = g.tape.log_sum_exp_rows(a);
              int pick = g.tape.gather_cols(a, {2, 0, 1, 2});
              Tensor w = Tensor::from(4, 1, {0.5, -1.0, 2.0, 0.25});
              g.loss = g.tape.sum_all(g.tape.mul_const(g.tape.sub(pick, lse), w));
              g.leaves = {a};
              return g;
          },
          {random_tensor(4, 3, rng)});
}

TEST_CASE("unreachable leaves get zero gradients and shape checks hold") {
    Tape t;
    int a = t.leaf(Tensor::from(2, 2, {1, 2, 3, 4}));
    int b = t.leaf(Tensor::from(2, 2, {5, 6, 7, 8}));  // never used
    int loss = t.mean_all(t.mul(a, a));
    std::vector<Tensor> grads = t.backward(loss);
    CHECK(grads[b].same_shape(t.value(b)));
    for (size_t i = 0; i < grads[b].size(); ++i) CHECK(grads[b][i] == 0.0);
    CHECK_THROWS(t.backward(a));  // non-scalar loss
}

TEST_CASE("adam matches a hand-computed trajectory") {
    // frozen from an independent reference run: beta1=0.5, beta2=0.999,
    // eps=1e-8, lr=0.1, w0=1, gradients 2.0 then 1.0
    Tensor w = Tensor::scalar(1.0);
    std::vector<Tensor*> params{&w};
    AdamState st = AdamState::for_params(params);
    Tensor g1 = Tensor::scalar(2.0), g2 = Tensor::scalar(1.0);
    adam_step(params, {&g1}, st, 0.1);
    CHECK(w.item() == doctest::Approx(0.9000000005).epsilon(1e-12));
    adam_step(params, {&g2}, st, 0.1);
    CHECK(w.item() == doctest::Approx(0.8156599384743666).epsilon(1e-12));
    CHECK(st.step == 2);

    Tensor wrong_shape(1, 2);
    CHECK_THROWS(adam_step(params, {&wrong_shape}, st, 0.1));
}

TEST_CASE("learning-rate schedule steps down by the decay factor") {
    LrSchedule s{1e-3, 0.98, 1000};
    CHECK(s.at(0) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(s.at(999) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(s.at(1000) == doctest::Approx(0.98e-3).epsilon(1e-12));
    CHECK(s.at(2500) == doctest::Approx(0.98 * 0.98 * 1e-3).epsilon(1e-12));
}

TEST_CASE("activations are stable across [-1e6, 1e6]") {
    for (double x : {-1e6, -50.0, -1.0, 0.0, 1.0, 50.0, 1e6}) {
        CHECK(std::isfinite(softplus(x)));
        CHECK(std::isfinite(sigmoid(x)));
    }
    CHECK(softplus(1e6) == doctest::Approx(1e6));
    CHECK(softplus(-1e6) == 0.0);
    CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(sigmoid(1e6) == 1.0);
    CHECK(sigmoid(-1e6) == 0.0);
    double xs[] = {1e6, 1e6 - 3.0};
    CHECK(log_sum_exp(std::span<const double>(xs, 2)) ==
          doctest::Approx(1e6 + std::log1p(std::exp(-3.0))).epsilon(1e-12));
}

TEST_CASE("rng streams are deterministic and splits decorrelate") {
    RngStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream base(7);
    CHECK(base.split(1).next_u64() != base.split(2).next_u64());
    // uniform stays inside (0, 1)
    RngStream u(3);
    for (int i = 0; i < 1000; ++i) {
        double v = u.uniform();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}
