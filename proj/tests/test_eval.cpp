#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairrep/data.hpp"
#include "fairrep/eval.hpp"
#include "fairrep/rng.hpp"

using namespace fairrep;

namespace {

constexpr double kLn2 = 0.6931471805599453;

std::vector<std::vector<double>> table(const SyntheticData& s) {
    return {{s.joint_counts[0][0], s.joint_counts[0][1]},
            {s.joint_counts[1][0], s.joint_counts[1][1]}};
}

ModelConfig small_config(int x_dim, int z_dim = 1, int hidden = 2) {
    ModelConfig cfg;
    cfg.x_dim = x_dim;
    cfg.u_group_count = 2;
    cfg.z_dim = z_dim;
    cfg.hidden_dim = hidden;
    cfg.binary_feature_mask.assign(x_dim, 0);
    return cfg;
}

// encoder whose posterior mean is a sharp step in x0 (softplus-difference
// construction) with near-zero posterior noise: z is effectively 1[x0 > 0]
EncoderParams step_encoder(const ModelConfig& cfg) {
    EncoderParams e;
    int in = cfg.x_dim + cfg.u_group_count;
    e.w1 = Tensor(in, 2);
    e.b1 = Tensor(1, 2);
    e.w_mean = Tensor(2, 1);
    e.b_mean = Tensor(1, 1);
    e.w_lstd = Tensor(2, 1);
    e.b_lstd = Tensor(1, 1);
    e.w1.at(0, 0) = 50.0;
    e.w1.at(0, 1) = 50.0;
    e.b1.at(0, 0) = 1.0;           // mean = sp(50 x0 + 1) - sp(50 x0), a unit step
    e.w_mean.at(0, 0) = 1.0;
    e.w_mean.at(1, 0) = -1.0;
    e.b_lstd.at(0, 0) = -6.0;      // posterior sigma ~ 3e-3
    return e;
}

double entropy2(double p) {
    double q = 1.0 - p;
    return -(p > 0 ? p * std::log(p) : 0.0) - (q > 0 ? q * std::log(q) : 0.0);
}

}  // namespace

TEST_CASE("discrete mutual information of exact tables") {
    CHECK(discrete_mi_oracle({{1, 1}, {1, 1}}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(discrete_mi_oracle({{1, 0}, {0, 1}}) == doctest::Approx(kLn2).epsilon(1e-12));
    CHECK(discrete_mi_oracle({{3, 1}, {1, 3}}) ==
          doctest::Approx(0.13081203594113697).epsilon(1e-12));
    // scale invariance
    CHECK(discrete_mi_oracle({{30, 10}, {10, 30}}) ==
          doctest::Approx(0.13081203594113697).epsilon(1e-12));
    CHECK_THROWS(discrete_mi_oracle({}));
    CHECK_THROWS(discrete_mi_oracle({{1, -1}, {1, 1}}));
    CHECK_THROWS(discrete_mi_oracle({{0, 0}, {0, 0}}));
}

TEST_CASE("rank-based auc") {
    CHECK(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == doctest::Approx(0.5));
    // invariant under strictly monotone transforms of the scores
    std::vector<double> s = {0.1, 0.4, 0.35, 0.8, 0.2, 0.66};
    std::vector<int> y = {0, 1, 0, 1, 1, 0};
    std::vector<double> t = s;
    for (double& v : t) v = std::exp(7.0 * v) - 3.0;
    CHECK(auc(s, y) == doctest::Approx(auc(t, y)).epsilon(1e-12));
    CHECK_THROWS(auc({0.1, 0.2}, {1, 1}));
    CHECK_THROWS(auc({0.1}, {1, 1}));
}

TEST_CASE("logistic regression readout") {
    RngStream rng(31);
    int n = 300;
    Tensor x(n, 2);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        x.at(i, 0) = rng.normal();
        x.at(i, 1) = rng.normal();
        y[i] = x.at(i, 0) + 0.2 > 0.0 ? 1 : 0;  // separable
    }
    DownstreamResult fit = fit_logistic_regression(x, y, 1e-4);
    CHECK(fit.converged);
    std::vector<double> preds = predict_logistic(fit.weights, x);
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += (preds[i] > 0.5) == (y[i] == 1);
    CHECK(correct == n);
    CHECK(auc(preds, y) == doctest::Approx(1.0));

    // labels independent of the features: auc hovers at chance
    std::vector<int> noise_y(n);
    for (int i = 0; i < n; ++i) noise_y[i] = rng.uniform() < 0.5;
    DownstreamResult chance = fit_logistic_regression(x, noise_y, 1.0);
    double chance_auc = auc(predict_logistic(chance.weights, x), noise_y);
    CHECK(chance_auc > 0.4);
    CHECK(chance_auc < 0.62);

    // duplicating every row while doubling l2 leaves the optimum unchanged
    Tensor x2(2 * n, 2);
    std::vector<int> y2(2 * n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) {
            x2.at(2 * i + k, 0) = x.at(i, 0);
            x2.at(2 * i + k, 1) = x.at(i, 1);
            y2[2 * i + k] = y[i];
        }
    DownstreamResult a = fit_logistic_regression(x, y, 0.5);
    DownstreamResult b = fit_logistic_regression(x2, y2, 1.0);
    for (int c = 0; c < 3; ++c)
        CHECK(a.weights[c] == doctest::Approx(b.weights[c]).epsilon(1e-6));

    CHECK_THROWS(fit_logistic_regression(x, std::vector<int>(n, 1), 1.0));
    CHECK_THROWS(fit_logistic_regression(x, std::vector<int>(n, 2), 1.0));
}

TEST_CASE("demographic parity distance") {
    CHECK(*delta_dp({1.0, 1.0, 0.0, 0.0}, {0, 0, 1, 1}, 2) == doctest::Approx(1.0));
    CHECK(*delta_dp({0.3, 0.3, 0.3}, {0, 1, 0}, 2) == doctest::Approx(0.0));
    CHECK(*delta_dp({0.8, 0.2, 0.6, 0.4}, {0, 1, 0, 1}, 2) == doctest::Approx(0.4));
    // relabeling the two groups cannot change the distance
    CHECK(*delta_dp({0.8, 0.2, 0.6, 0.4}, {1, 0, 1, 0}, 2) == doctest::Approx(0.4));
    // not defined beyond two groups or with an empty group
    CHECK(!delta_dp({0.5, 0.5}, {0, 1}, 18).has_value());
    CHECK(!delta_dp({0.5, 0.5}, {0, 0}, 2).has_value());
}

TEST_CASE("equalized odds and opportunity distances") {
    std::vector<double> p = {0.9, 0.7, 0.6, 0.5, 0.2, 0.2, 0.4, 0.3};
    std::vector<int> u = {0, 0, 1, 1, 0, 0, 1, 1};
    std::vector<int> y = {1, 1, 1, 1, 0, 0, 0, 0};
    // y=1 gap |0.8 - 0.55| = 0.25, y=0 gap |0.2 - 0.35| = 0.15
    CHECK(*delta_eo(p, u, 2, y) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(*delta_eopp(p, u, 2, y) == doctest::Approx(0.25).epsilon(1e-12));

    // with only positive labels both reduce to the same single slice
    std::vector<int> ones(8, 1);
    CHECK(*delta_eo(p, u, 2, ones) == doctest::Approx(*delta_eopp(p, u, 2, ones)));
    CHECK(!delta_eo(p, u, 2, {}).has_value());
    CHECK(!delta_eopp(p, u, 18, y).has_value());
}

TEST_CASE("pca: orthonormal components, ordered variance, lossless at full rank") {
    RngStream rng(41);
    int n = 500;
    Tensor x(n, 2);
    for (int i = 0; i < n; ++i) {
        double a = 3.0 * rng.normal(), b = 1.0 * rng.normal();
        x.at(i, 0) = 2.0 + a * 0.6 - b * 0.8;
        x.at(i, 1) = -1.0 + a * 0.8 + b * 0.6;
    }
    PcaResult r = pca_features(x, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double dot = 0.0;
            for (int c = 0; c < 2; ++c) dot += r.components.at(i, c) * r.components.at(j, c);
            CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
        }
    REQUIRE(r.explained_variance.size() == 2);
    CHECK(r.explained_variance[0] > r.explained_variance[1]);
    CHECK(r.explained_variance[0] / (r.explained_variance[0] + r.explained_variance[1]) >
          0.85);
    // dominant direction recovered with the positive-loading sign convention
    CHECK(r.components.at(0, 0) == doctest::Approx(0.6).epsilon(0.05));
    CHECK(r.components.at(0, 1) == doctest::Approx(0.8).epsilon(0.05));

    // full-rank projection reconstructs the data exactly
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < 2; ++c) {
            double rec = r.mean.at(0, c);
            for (int k = 0; k < 2; ++k) rec += r.projected.at(i, k) * r.components.at(k, c);
            CHECK(rec == doctest::Approx(x.at(i, c)).epsilon(1e-9));
        }

    CHECK_THROWS(pca_features(x, 0));
    CHECK_THROWS(pca_features(x, 3));
}

TEST_CASE("budget heuristic: entropy ceiling and probe-run floor") {
    SyntheticSpec spec;
    spec.n = 400;
    spec.x_dim = 4;
    spec.rho = 0.5;
    TabularDataset d = split(synthetic_gen(spec, 51).data, 0.8, 51).train;

    TrainConfig probe;
    probe.epochs = 5;
    probe.batch_size = 128;
    probe.adversary_steps = 1;
    probe.seed = 7;
    probe.model.x_dim = d.x_dim();
    probe.model.u_group_count = d.group_count;
    probe.model.z_dim = 4;
    probe.model.hidden_dim = 16;
    probe.model.binary_feature_mask = d.binary_feature_mask;

    FeasibleEps eps = estimate_feasible_eps(probe, d);
    double p1 = 0.0;
    for (int v : d.u) p1 += v;
    p1 /= d.n();
    CHECK(eps.eps2_ceiling == doctest::Approx(entropy2(p1)).epsilon(1e-12));
    CHECK(eps.eps1_floor > 0.0);

    // the floor is exactly the smoothed terminal c1 of the forced probe run
    TrainConfig forced = probe;
    forced.mode = TrainMode::MIFR;
    forced.initial_lambda = Multipliers{1.0, 0.01, 0.01, 0.01};
    CHECK(eps.eps1_floor == train(forced, d).state.ema.c1);

    // hand-check of the ceiling on a fixed 3:1 group composition
    TabularDataset skew = d;
    for (int i = 0; i < skew.n(); ++i) skew.u[i] = (i % 4 == 0) ? 1 : 0;
    CHECK(estimate_feasible_eps(probe, skew).eps2_ceiling ==
          doctest::Approx(0.5623351446188083).epsilon(1e-12));
}

TEST_CASE("mi estimators: uninformative encoder scores zero on both") {
    SyntheticSpec spec;
    spec.n = 1200;
    spec.x_dim = 4;
    spec.rho = 0.8;
    TabularDataset d = synthetic_gen(spec, 61).data;
    ModelConfig cfg = small_config(4, 2, 8);
    ModelParams params = init_params(cfg, 3);
    for (Tensor* t : params.enc.tensors())
        for (size_t i = 0; i < t->size(); ++i) (*t)[i] = 0.0;

    MIOptions opts;
    opts.seed = 11;
    MIEstimates mi = estimate_mi(params.enc, cfg, d, d, opts);
    CHECK(std::abs(mi.i_xz_given_u) < 0.05);
    CHECK(std::abs(mi.i_zu) < 0.02);
    CHECK(mi.i_zu_se < 0.01);
    CHECK(mi.train_count == d.n());
    CHECK(mi.subsample == opts.subsample);
}

TEST_CASE("mi estimators recover the discrete ground truth of a step embedding") {
    SyntheticSpec spec;
    spec.n = 1500;
    spec.x_dim = 4;
    spec.rho = 0.8;
    SyntheticData s = synthetic_gen(spec, 71);
    const TabularDataset& d = s.data;  // raw scale: the step threshold sits at 0

    ModelConfig cfg = small_config(4);
    EncoderParams enc = step_encoder(cfg);
    MIOptions opts;
    opts.seed = 5;
    MIEstimates mi = estimate_mi(enc, cfg, d, d, opts);

    std::vector<std::vector<double>> joint = table(s);
    double truth_zu = discrete_mi_oracle(joint);
    CHECK(std::abs(mi.i_zu - truth_zu) < 0.05);

    // conditional information of a binary embedding: H(f) - I(f;u) given u,
    // i.e. H(f|u) computed from the realized joint table
    double n = 0.0, hu = 0.0, hfu = 0.0;
    double ucol[2] = {joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]};
    for (auto& row : joint)
        for (double v : row) n += v;
    for (double v : ucol) hu += -(v / n) * std::log(v / n);
    for (auto& row : joint)
        for (double v : row) hfu += v > 0 ? -(v / n) * std::log(v / n) : 0.0;
    double truth_xz = hfu - hu;  // H(f|u)
    CHECK(std::abs(mi.i_xz_given_u - truth_xz) < 0.1);

    // information about u can never exceed its entropy
    CHECK(mi.i_zu <= hu + 0.05);
    ModelParams random_model = init_params(small_config(4, 3, 10), 9);
    MIEstimates rnd = estimate_mi(random_model.enc, small_config(4, 3, 10), d, d, opts);
    CHECK(rnd.i_zu <= hu + 0.05);
    CHECK(rnd.i_xz_given_u >= -0.05);
}

TEST_CASE("full evaluation report") {
    SyntheticSpec spec;
    spec.n = 800;
    spec.x_dim = 4;
    spec.rho = 0.6;
    DataSplit ds = split(synthetic_gen(spec, 81).data, 0.8, 81);
    ModelConfig cfg = small_config(4, 3, 12);
    ModelParams params = init_params(cfg, 1);

    MIOptions opts;
    opts.seed = 2;
    EvalReport rep = evaluate(params, cfg, ds, opts);
    CHECK(rep.has_downstream);
    CHECK(rep.mi.test_count == ds.test.n());
    CHECK(rep.downstream.test_auc >= 0.0);
    CHECK(rep.fairness.dp.has_value());
    CHECK(rep.fairness.eo.has_value());

    std::string text = render_report(rep);
    CHECK(text.find("mi_zu") != std::string::npos);
    CHECK(text.find("test_auc") != std::string::npos);
    CHECK(text.find("delta_dp") != std::string::npos);
}
