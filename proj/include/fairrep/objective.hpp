#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "fairrep/dist.hpp"
#include "fairrep/model.hpp"
#include "fairrep/rng.hpp"
#include "fairrep/tape.hpp"

namespace fairrep {

enum class ConstraintId { C1, C2, EO, EOpp };
constexpr ConstraintId kAllConstraints[] = {ConstraintId::C1, ConstraintId::C2,
                                            ConstraintId::EO, ConstraintId::EOpp};

constexpr double kLambdaMin = 0.01;
constexpr double kLambdaMax = 100.0;

/// Constraint budgets in nats. A disabled constraint has budget +infinity.
struct ConstraintSpec {
    double eps_c1 = std::numeric_limits<double>::infinity();
    double eps_c2 = std::numeric_limits<double>::infinity();
    double eps_eo = std::numeric_limits<double>::infinity();
    double eps_eopp = std::numeric_limits<double>::infinity();

    double eps(ConstraintId id) const;
    void set_eps(ConstraintId id, double value);
    bool enabled(ConstraintId id) const { return std::isfinite(eps(id)); }
    bool any_enabled() const;
    bool needs_labels() const { return enabled(ConstraintId::EO) || enabled(ConstraintId::EOpp); }
    void validate() const;  // enabled budgets must be > 0
};

struct Multipliers {
    double c1 = 1.0;
    double c2 = 1.0;
    double eo = 1.0;
    double eopp = 1.0;

    double get(ConstraintId id) const;
    void set(ConstraintId id, double value);
    void clamp_all();
};

struct BatchEstimates {
    double l_r = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c_eo = 0.0;
    double c_eopp = 0.0;
    int batch_size = 0;

    double constraint(ConstraintId id) const;
};

/// One minibatch in tensor form plus the noise draw for reparameterization.
struct BatchTensors {
    Tensor x;          // B x d
    Tensor u_onehot;   // B x K
    std::vector<int> u;
    std::vector<int> y;  // empty when unlabeled
    Tensor noise;      // B x z_dim

    int size() const { return x.rows(); }
};

BatchTensors make_batch(const Tensor& x, const std::vector<int>& u, const std::vector<int>& y,
                        const std::vector<int>& rows, int group_count, int z_dim, RngStream& noise_rng);

/// All loss terms of one outer step share a single tape (and one z sample per
/// datapoint). Backward over `total` yields encoder/decoder gradients; the
/// adversaries' leaves also receive gradients but the trainer does not apply
/// them here, which freezes the max-players inside the constraint terms.
struct LossGraph {
    Tape tape;
    EncoderNodes enc;
    DecoderNodes dec;
    AdversaryNodes adv;
    AdversaryNodes adv_y;
    bool has_adv_y = false;
    PosteriorNodes post;
    int z = -1;
    int l_r = -1;
    int c1 = -1;
    int c2 = -1;
    int c_eo = -1;
    int c_eopp = -1;
};

/// Builds L_r, C1, C2 and (when labels and a label-conditioned adversary are
/// supplied) C_EO/C_EOpp nodes for a batch. label_pos_freq is the dataset-wide
/// P(y = 1) used for the equalized-odds slice weights.
LossGraph build_loss_graph(const ModelParams& params, const ModelConfig& cfg,
                           const BatchTensors& batch, const EmpiricalCategorical& p_u,
                           double label_pos_freq, bool want_eo_terms);

/// Adversary cross-entropy graph: -mean log p_psi(u|z[,y]), z freshly sampled
/// through the (frozen) encoder. Minimized over the adversary only.
struct AdversaryGraph {
    Tape tape;
    AdversaryNodes adv;
    int loss = -1;
};

AdversaryGraph build_adversary_graph(const EncoderParams& enc, const AdversaryParams& adv,
                                     const ModelConfig& cfg, const BatchTensors& batch,
                                     bool label_conditioned);

// ---- Spec-level scalar operations (each builds a throwaway graph) ----

double recon_loss(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg);
double c1_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg);
double c2_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg,
               const EmpiricalCategorical& p_u);
double adversary_loss(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg);
double ceo_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg,
                const EmpiricalCategorical& p_u, double label_pos_freq);
double ceopp_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg,
                  const EmpiricalCategorical& p_u);

/// Fixed-multiplier loss: L_r + sum_i lambda_i * C_i (epsilon offsets are
/// constants w.r.t. the parameters and are dropped).
double mifr_loss(const BatchEstimates& est, const Multipliers& lambda);

/// Dual loss: L_r + sum over enabled constraints of lambda_i * (C_i - eps_i).
double lmifr_loss(const BatchEstimates& est, const Multipliers& lambda, const ConstraintSpec& spec);

/// lambda_i <- clamp(lambda_i + eta * (C_i - eps_i), 0.01, 100) for enabled i.
Multipliers lambda_ascent_step(const Multipliers& lambda, const BatchEstimates& est,
                               const ConstraintSpec& spec, double eta_lambda);

}  // namespace fairrep
