#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fairrep/data.hpp"
#include "fairrep/model.hpp"
#include "fairrep/trainer.hpp"

namespace fairrep {

struct MIOptions {
    int subsample = 5000;   // per-group cap on mixture components
    uint64_t seed = 0;
};

struct MIEstimates {
    double i_xz_given_u = 0.0;  // nats
    double i_zu = 0.0;          // nats
    double i_xz_se = 0.0;       // standard error of the per-sample terms
    double i_zu_se = 0.0;
    int train_count = 0;
    int test_count = 0;
    int subsample = 0;
};

/// KDE-style estimators over the encoder posterior: q(z|u) is approximated by
/// a uniform mixture of the (subsampled) training posteriors of group u, and
/// q(u|z) by Bayes over those per-group mixtures with the empirical p(u).
MIEstimates estimate_mi(const EncoderParams& enc, const ModelConfig& cfg,
                        const TabularDataset& train, const TabularDataset& test,
                        const MIOptions& opts);

double estimate_mi_xz_given_u(const EncoderParams& enc, const ModelConfig& cfg,
                              const TabularDataset& train, const TabularDataset& test,
                              const MIOptions& opts);

double estimate_mi_zu(const EncoderParams& enc, const ModelConfig& cfg,
                      const TabularDataset& train, const TabularDataset& test,
                      const MIOptions& opts);

/// Exact plug-in mutual information (nats) of a normalized count table.
double discrete_mi_oracle(const std::vector<std::vector<double>>& joint_counts);

struct DownstreamResult {
    Tensor weights;                     // 1 x (d + 1); last entry is the intercept
    double test_auc = 0.0;
    std::vector<double> predictions;    // test-set probabilities
    int iterations = 0;
    bool converged = false;
};

/// Deterministic full-batch Newton fit of L2-regularized logistic regression
/// (intercept unpenalized), to gradient inf-norm < 1e-6 or the iteration cap.
DownstreamResult fit_logistic_regression(const Tensor& x, const std::vector<int>& y,
                                         double l2_strength, int max_iterations = 100);

std::vector<double> predict_logistic(const Tensor& weights, const Tensor& x);

/// Mann-Whitney AUC; ties count one half. Throws when a class is missing.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Parity distances over expected classifier outcomes. An empty optional is
/// the not-applicable marker (wrong group count, empty required slice).
std::optional<double> delta_dp(const std::vector<double>& predictions, const std::vector<int>& u,
                               int group_count);
std::optional<double> delta_eo(const std::vector<double>& predictions, const std::vector<int>& u,
                               int group_count, const std::vector<int>& y);
std::optional<double> delta_eopp(const std::vector<double>& predictions, const std::vector<int>& u,
                                 int group_count, const std::vector<int>& y);

struct FairnessMetrics {
    std::optional<double> dp, eo, eopp;
};

struct FeasibleEps {
    double eps1_floor = 0.0;    // terminal C1 of a short conditional-VAE probe
    double eps2_ceiling = 0.0;  // H(u) of the empirical marginal
};

/// Budget heuristic: trains probe_config (forced to fixed multipliers lambda1=1,
/// lambda2=0 with constraints off) and reads off the smoothed terminal C1;
/// pairs it with the entropy ceiling on C2.
FeasibleEps estimate_feasible_eps(TrainConfig probe_config, const TabularDataset& data);

struct PcaResult {
    Tensor components;                      // k x d, orthonormal rows
    Tensor mean;                            // 1 x d
    std::vector<double> explained_variance; // eigenvalues, descending
    Tensor projected;                       // n x k
};

/// Top-k principal components of mean-centered x. Sign convention: the
/// largest-magnitude loading of each component is positive.
PcaResult pca_features(const Tensor& x, int k);

struct EvalReport {
    MIEstimates mi;
    bool has_downstream = false;
    DownstreamResult downstream;
    FairnessMetrics fairness;
};

/// Full post-hoc evaluation of a trained model on a split: MI estimates, a
/// logistic-regression readout on posterior means (when labels exist), and
/// fairness metrics of its test predictions.
EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, const DataSplit& split,
                    const MIOptions& opts, double downstream_l2 = 1.0);

/// Key/value record rendering of a report (one `key = value` line each).
std::string render_report(const EvalReport& report);

}  // namespace fairrep
