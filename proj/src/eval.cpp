#include "fairrep/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "fairrep/activations.hpp"
#include "fairrep/kernels.hpp"
#include "fairrep/rng.hpp"

namespace fairrep {

namespace {

// per-group mixtures of training posteriors, subsampled to the component cap
struct GroupMixtures {
    std::vector<GaussianMixture> by_group;
    EmpiricalCategorical p_u;
};

GroupMixtures build_group_mixtures(const EncoderParams& enc, const ModelConfig& cfg,
                                   const TabularDataset& train, const MIOptions& opts) {
    if (opts.subsample < 1) throw std::invalid_argument("estimate_mi: subsample must be >= 1");
    Tensor means, log_stds;
    encode_batch(enc, cfg, train.x, train.u, means, log_stds);

    GroupMixtures out;
    out.p_u = fit_empirical(train.u, train.group_count);
    out.by_group.resize(train.group_count);
    RngStream root(opts.seed);
    for (int g = 0; g < train.group_count; ++g) {
        std::vector<int> idx;
        for (int i = 0; i < train.n(); ++i)
            if (train.u[i] == g) idx.push_back(i);
        if (idx.empty())
            throw std::invalid_argument("estimate_mi: training group " + std::to_string(g) +
                                        " is empty");
        if (static_cast<int>(idx.size()) > opts.subsample) {
            RngStream s = root.split(static_cast<uint64_t>(g) + 1);
            for (int i = 0; i < opts.subsample; ++i) {
                int j = i + static_cast<int>(s.below(idx.size() - i));
                std::swap(idx[i], idx[j]);
            }
            idx.resize(opts.subsample);
        }
        GaussianMixture& m = out.by_group[g];
        m.means = Tensor(static_cast<int>(idx.size()), cfg.z_dim);
        m.log_stds = Tensor(static_cast<int>(idx.size()), cfg.z_dim);
        for (size_t r = 0; r < idx.size(); ++r)
            for (int c = 0; c < cfg.z_dim; ++c) {
                m.means.at(static_cast<int>(r), c) = means.at(idx[r], c);
                m.log_stds.at(static_cast<int>(r), c) = log_stds.at(idx[r], c);
            }
    }
    return out;
}

// Gaussian elimination with partial pivoting; a is overwritten
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300)
            throw std::runtime_error("fit_logistic_regression: singular Newton system");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

double logistic_objective(const Tensor& x, const std::vector<int>& y, const std::vector<double>& w,
                          double l2) {
    int n = x.rows(), d = x.cols();
    double loss = 0.0;
    for (int r = 0; r < n; ++r) {
        double s = w[d];
        for (int c = 0; c < d; ++c) s += w[c] * x.at(r, c);
        // log(1 + e^s) - y*s, stable through softplus
        loss += softplus(s) - y[r] * s;
    }
    for (int c = 0; c < d; ++c) loss += 0.5 * l2 * w[c] * w[c];
    return loss;
}

// Jacobi eigendecomposition of a symmetric matrix; returns eigenvalues and
// sets vecs so that column j is the eigenvector of eigenvalue j
std::vector<double> jacobi_eigen(std::vector<std::vector<double>> a,
                                 std::vector<std::vector<double>>& vecs) {
    int n = static_cast<int>(a.size());
    vecs.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) vecs[i][i] = 1.0;

    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = vecs[k][p], vkq = vecs[k][q];
                    vecs[k][p] = c * vkp - s * vkq;
                    vecs[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) vals[i] = a[i][i];
    return vals;
}

std::optional<double> slice_gap(const std::vector<double>& preds, const std::vector<int>& u,
                                const std::vector<char>& in_slice) {
    double sum[2] = {0.0, 0.0};
    int cnt[2] = {0, 0};
    for (size_t i = 0; i < preds.size(); ++i) {
        if (!in_slice[i]) continue;
        sum[u[i]] += preds[i];
        ++cnt[u[i]];
    }
    if (cnt[0] == 0 || cnt[1] == 0) return std::nullopt;
    return std::abs(sum[0] / cnt[0] - sum[1] / cnt[1]);
}

void check_pred_inputs(const std::vector<double>& preds, const std::vector<int>& u) {
    if (preds.size() != u.size() || preds.empty())
        throw std::invalid_argument("fairness metric: predictions and groups must align");
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

}  // namespace

// ------------------------------------------------------------- MI estimators

MIEstimates estimate_mi(const EncoderParams& enc, const ModelConfig& cfg,
                        const TabularDataset& train, const TabularDataset& test,
                        const MIOptions& opts) {
    if (train.group_count != test.group_count)
        throw std::invalid_argument("estimate_mi: train/test group counts differ");
    GroupMixtures mix = build_group_mixtures(enc, cfg, train, opts);

    Tensor t_means, t_lstds;
    encode_batch(enc, cfg, test.x, test.u, t_means, t_lstds);

    int n = test.n();
    RngStream noise = RngStream(opts.seed).split(0xE7A1);
    Tensor zs(n, cfg.z_dim);
    std::vector<double> log_q_own(n);
    Tensor mean_row(1, cfg.z_dim), lstd_row(1, cfg.z_dim), z_row(1, cfg.z_dim);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < cfg.z_dim; ++c) {
            mean_row.at(0, c) = t_means.at(r, c);
            lstd_row.at(0, c) = t_lstds.at(r, c);
            z_row.at(0, c) = mean_row.at(0, c) + std::exp(lstd_row.at(0, c)) * noise.normal();
            zs.at(r, c) = z_row.at(0, c);
        }
        log_q_own[r] = gaussian_log_prob(DiagGaussian{mean_row, lstd_row}, z_row);
    }

    // per-group mixture log-densities of every sampled z, O(K * N * M * d)
    std::vector<std::vector<double>> lq(train.group_count);
    for (int g = 0; g < train.group_count; ++g)
        lq[g] = kernels::mixture_log_prob_rows(mix.by_group[g].means, mix.by_group[g].log_stds, zs);

    double i_xz = 0.0, i_zu = 0.0, i_xz_sq = 0.0, i_zu_sq = 0.0;
    std::vector<double> posterior(train.group_count);
    for (int r = 0; r < n; ++r) {
        int u = test.u[r];
        double txz = log_q_own[r] - lq[u][r];
        for (int g = 0; g < train.group_count; ++g)
            posterior[g] = mix.p_u.log_prob(g) + lq[g][r];
        double tzu = lq[u][r] - log_sum_exp(posterior);
        i_xz += txz;
        i_zu += tzu;
        i_xz_sq += txz * txz;
        i_zu_sq += tzu * tzu;
    }

    MIEstimates out;
    out.i_xz_given_u = i_xz / n;
    out.i_zu = i_zu / n;
    out.i_xz_se = std::sqrt(std::max(0.0, i_xz_sq / n - out.i_xz_given_u * out.i_xz_given_u) / n);
    out.i_zu_se = std::sqrt(std::max(0.0, i_zu_sq / n - out.i_zu * out.i_zu) / n);
    out.train_count = train.n();
    out.test_count = n;
    out.subsample = opts.subsample;
    return out;
}

double estimate_mi_xz_given_u(const EncoderParams& enc, const ModelConfig& cfg,
                              const TabularDataset& train, const TabularDataset& test,
                              const MIOptions& opts) {
    return estimate_mi(enc, cfg, train, test, opts).i_xz_given_u;
}

double estimate_mi_zu(const EncoderParams& enc, const ModelConfig& cfg,
                      const TabularDataset& train, const TabularDataset& test,
                      const MIOptions& opts) {
    return estimate_mi(enc, cfg, train, test, opts).i_zu;
}

double discrete_mi_oracle(const std::vector<std::vector<double>>& joint_counts) {
    if (joint_counts.empty() || joint_counts[0].empty())
        throw std::invalid_argument("discrete_mi_oracle: empty table");
    size_t cols = joint_counts[0].size();
    double total = 0.0;
    for (const auto& row : joint_counts) {
        if (row.size() != cols) throw std::invalid_argument("discrete_mi_oracle: ragged table");
        for (double v : row) {
            if (v < 0.0) throw std::invalid_argument("discrete_mi_oracle: negative count");
            total += v;
        }
    }
    if (total <= 0.0) throw std::invalid_argument("discrete_mi_oracle: all-zero table");

    std::vector<double> pa(joint_counts.size(), 0.0), pb(cols, 0.0);
    for (size_t a = 0; a < joint_counts.size(); ++a)
        for (size_t b = 0; b < cols; ++b) {
            pa[a] += joint_counts[a][b] / total;
            pb[b] += joint_counts[a][b] / total;
        }
    double mi = 0.0;
    for (size_t a = 0; a < joint_counts.size(); ++a)
        for (size_t b = 0; b < cols; ++b) {
            double p = joint_counts[a][b] / total;
            if (p > 0.0) mi += p * std::log(p / (pa[a] * pb[b]));
        }
    return std::max(mi, 0.0);
}

// ------------------------------------------------------------- downstream

DownstreamResult fit_logistic_regression(const Tensor& x, const std::vector<int>& y,
                                         double l2_strength, int max_iterations) {
    int n = x.rows(), d = x.cols();
    if (n == 0 || static_cast<int>(y.size()) != n)
        throw std::invalid_argument("fit_logistic_regression: features and labels must align");
    if (l2_strength < 0.0) throw std::invalid_argument("fit_logistic_regression: negative l2");
    int pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1)
            throw std::invalid_argument("fit_logistic_regression: labels must be 0/1");
        pos += v;
    }
    if (pos == 0 || pos == n)
        throw std::invalid_argument("fit_logistic_regression: labels contain a single class");

    std::vector<double> w(d + 1, 0.0);  // w[d] = intercept
    DownstreamResult out;
    double cur = logistic_objective(x, y, w, l2_strength);

    for (int iter = 0; iter < max_iterations; ++iter) {
        std::vector<double> grad(d + 1, 0.0);
        std::vector<std::vector<double>> hess(d + 1, std::vector<double>(d + 1, 0.0));
        for (int r = 0; r < n; ++r) {
            double s = w[d];
            for (int c = 0; c < d; ++c) s += w[c] * x.at(r, c);
            double p = sigmoid(s);
            double resid = p - y[r];
            double wt = std::max(p * (1.0 - p), 1e-10);
            for (int c = 0; c < d; ++c) grad[c] += resid * x.at(r, c);
            grad[d] += resid;
            for (int a = 0; a <= d; ++a) {
                double xa = a < d ? x.at(r, a) : 1.0;
                for (int b = a; b <= d; ++b) {
                    double xb = b < d ? x.at(r, b) : 1.0;
                    hess[a][b] += wt * xa * xb;
                }
            }
        }
        for (int c = 0; c < d; ++c) {
            grad[c] += l2_strength * w[c];
            hess[c][c] += l2_strength;
        }
        hess[d][d] += 1e-10;  // keep the Newton system well-posed for separable data
        for (int a = 0; a <= d; ++a)
            for (int b = 0; b < a; ++b) hess[a][b] = hess[b][a];

        double gnorm = 0.0;
        for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
        out.iterations = iter;
        if (gnorm < 1e-6) {
            out.converged = true;
            break;
        }

        std::vector<double> step = solve_linear(hess, grad);
        double scale = 1.0;
        for (int half = 0; half < 30; ++half) {
            std::vector<double> cand(d + 1);
            for (int c = 0; c <= d; ++c) cand[c] = w[c] - scale * step[c];
            double next = logistic_objective(x, y, cand, l2_strength);
            if (next <= cur) {
                w = std::move(cand);
                cur = next;
                break;
            }
            scale *= 0.5;
        }
        out.iterations = iter + 1;
    }

    out.weights = Tensor::row(std::move(w));
    return out;
}

std::vector<double> predict_logistic(const Tensor& weights, const Tensor& x) {
    int d = x.cols();
    if (weights.size() != static_cast<size_t>(d) + 1)
        throw std::invalid_argument("predict_logistic: weight/feature dimension mismatch");
    std::vector<double> out(x.rows());
    for (int r = 0; r < x.rows(); ++r) {
        double s = weights[d];
        for (int c = 0; c < d; ++c) s += weights[c] * x.at(r, c);
        out[r] = sigmoid(s);
    }
    return out;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("auc: scores and labels must align");
    // rank-sum form: sort once, assign mid-ranks to ties
    size_t n = scores.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    long n_pos = 0, n_neg = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += mid_rank;
        i = j;
    }
    for (int v : labels) {
        if (v != 0 && v != 1) throw std::invalid_argument("auc: labels must be 0/1");
        (v == 1 ? n_pos : n_neg)++;
    }
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: both classes required");
    return (rank_sum_pos - 0.5 * n_pos * (n_pos + 1)) / (static_cast<double>(n_pos) * n_neg);
}

// ------------------------------------------------------------- fairness

std::optional<double> delta_dp(const std::vector<double>& predictions, const std::vector<int>& u,
                               int group_count) {
    check_pred_inputs(predictions, u);
    if (group_count != 2) return std::nullopt;
    std::vector<char> all(predictions.size(), 1);
    return slice_gap(predictions, u, all);
}

std::optional<double> delta_eo(const std::vector<double>& predictions, const std::vector<int>& u,
                               int group_count, const std::vector<int>& y) {
    check_pred_inputs(predictions, u);
    if (group_count != 2 || y.size() != predictions.size()) return std::nullopt;
    double sum = 0.0;
    int terms = 0;
    for (int label = 0; label <= 1; ++label) {
        std::vector<char> in_slice(predictions.size());
        bool any = false;
        for (size_t i = 0; i < y.size(); ++i) {
            in_slice[i] = y[i] == label;
            any = any || in_slice[i];
        }
        if (!any) continue;  // degenerate dataset: average over present labels
        std::optional<double> gap = slice_gap(predictions, u, in_slice);
        if (!gap) return std::nullopt;
        sum += *gap;
        ++terms;
    }
    if (terms == 0) return std::nullopt;
    return sum / terms;
}

std::optional<double> delta_eopp(const std::vector<double>& predictions, const std::vector<int>& u,
                                 int group_count, const std::vector<int>& y) {
    check_pred_inputs(predictions, u);
    if (group_count != 2 || y.size() != predictions.size()) return std::nullopt;
    std::vector<char> in_slice(predictions.size());
    for (size_t i = 0; i < y.size(); ++i) in_slice[i] = y[i] == 1;
    return slice_gap(predictions, u, in_slice);
}

// ------------------------------------------------------------- eps heuristic

FeasibleEps estimate_feasible_eps(TrainConfig probe_config, const TabularDataset& data) {
    probe_config.mode = TrainMode::MIFR;
    probe_config.constraints = ConstraintSpec{};
    probe_config.initial_lambda = Multipliers{1.0, kLambdaMin, kLambdaMin, kLambdaMin};
    probe_config.model.label_conditioned_adversaries = false;
    probe_config.pin_encoder_to_prior = false;

    TrainResult r = train(probe_config, data);
    FeasibleEps out;
    out.eps1_floor = r.state.ema.c1;
    out.eps2_ceiling = fit_empirical(data.u, data.group_count).entropy();
    return out;
}

// ------------------------------------------------------------- PCA

PcaResult pca_features(const Tensor& x, int k) {
    int n = x.rows(), d = x.cols();
    if (k < 1 || k > d) throw std::invalid_argument("pca_features: k out of range");
    if (n < 2) throw std::invalid_argument("pca_features: need at least two rows");

    PcaResult out;
    out.mean = Tensor(1, d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) out.mean.at(0, c) += x.at(r, c) / n;

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (int r = 0; r < n; ++r)
        for (int a = 0; a < d; ++a) {
            double xa = x.at(r, a) - out.mean.at(0, a);
            for (int b = a; b < d; ++b)
                cov[a][b] += xa * (x.at(r, b) - out.mean.at(0, b)) / (n - 1);
        }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < a; ++b) cov[a][b] = cov[b][a];

    std::vector<std::vector<double>> vecs;
    std::vector<double> vals = jacobi_eigen(cov, vecs);

    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] > vals[b]; });

    out.components = Tensor(k, d);
    out.explained_variance.resize(k);
    for (int j = 0; j < k; ++j) {
        int e = order[j];
        out.explained_variance[j] = vals[e];
        int arg = 0;
        for (int c = 1; c < d; ++c)
            if (std::abs(vecs[c][e]) > std::abs(vecs[arg][e])) arg = c;
        double sign = vecs[arg][e] >= 0.0 ? 1.0 : -1.0;
        for (int c = 0; c < d; ++c) out.components.at(j, c) = sign * vecs[c][e];
    }

    out.projected = Tensor(n, k);
    for (int r = 0; r < n; ++r)
        for (int j = 0; j < k; ++j) {
            double s = 0.0;
            for (int c = 0; c < d; ++c)
                s += (x.at(r, c) - out.mean.at(0, c)) * out.components.at(j, c);
            out.projected.at(r, j) = s;
        }
    return out;
}

// ------------------------------------------------------------- full report

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, const DataSplit& split,
                    const MIOptions& opts, double downstream_l2) {
    EvalReport rep;
    rep.mi = estimate_mi(params.enc, cfg, split.train, split.test, opts);

    if (split.train.has_labels && split.test.has_labels) {
        Tensor mtr, ltr, mte, lte;
        encode_batch(params.enc, cfg, split.train.x, split.train.u, mtr, ltr);
        encode_batch(params.enc, cfg, split.test.x, split.test.u, mte, lte);
        rep.downstream = fit_logistic_regression(mtr, split.train.y, downstream_l2);
        rep.downstream.predictions = predict_logistic(rep.downstream.weights, mte);
        rep.downstream.test_auc = auc(rep.downstream.predictions, split.test.y);
        rep.has_downstream = true;
        rep.fairness.dp = delta_dp(rep.downstream.predictions, split.test.u, split.test.group_count);
        rep.fairness.eo = delta_eo(rep.downstream.predictions, split.test.u,
                                   split.test.group_count, split.test.y);
        rep.fairness.eopp = delta_eopp(rep.downstream.predictions, split.test.u,
                                       split.test.group_count, split.test.y);
    }
    return rep;
}

std::string render_report(const EvalReport& report) {
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", report.mi.i_xz_given_u);
    out << "mi_xz_given_u = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", report.mi.i_zu);
    out << "mi_zu = " << buf << "\n";
    out << "mi_train_count = " << report.mi.train_count << "\n";
    out << "mi_test_count = " << report.mi.test_count << "\n";
    out << "mi_subsample = " << report.mi.subsample << "\n";
    if (report.has_downstream) {
        std::snprintf(buf, sizeof buf, "%.6f", report.downstream.test_auc);
        out << "test_auc = " << buf << "\n";
        out << "delta_dp = " << fmt_opt(report.fairness.dp) << "\n";
        out << "delta_eo = " << fmt_opt(report.fairness.eo) << "\n";
        out << "delta_eopp = " << fmt_opt(report.fairness.eopp) << "\n";
    } else {
        out << "test_auc = n/a\ndelta_dp = n/a\ndelta_eo = n/a\ndelta_eopp = n/a\n";
    }
    return out.str();
}

}  // namespace fairrep
