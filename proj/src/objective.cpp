#include "fairrep/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fairrep {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}

// ---------------------------------------------------------------- small types

double ConstraintSpec::eps(ConstraintId id) const {
    switch (id) {
        case ConstraintId::C1: return eps_c1;
        case ConstraintId::C2: return eps_c2;
        case ConstraintId::EO: return eps_eo;
        case ConstraintId::EOpp: return eps_eopp;
    }
    return 0.0;
}

void ConstraintSpec::set_eps(ConstraintId id, double value) {
    switch (id) {
        case ConstraintId::C1: eps_c1 = value; break;
        case ConstraintId::C2: eps_c2 = value; break;
        case ConstraintId::EO: eps_eo = value; break;
        case ConstraintId::EOpp: eps_eopp = value; break;
    }
}

bool ConstraintSpec::any_enabled() const {
    for (ConstraintId id : kAllConstraints)
        if (enabled(id)) return true;
    return false;
}

void ConstraintSpec::validate() const {
    for (ConstraintId id : kAllConstraints)
        if (enabled(id) && eps(id) <= 0.0)
            throw std::invalid_argument("ConstraintSpec: enabled budgets must be positive");
}

double Multipliers::get(ConstraintId id) const {
    switch (id) {
        case ConstraintId::C1: return c1;
        case ConstraintId::C2: return c2;
        case ConstraintId::EO: return eo;
        case ConstraintId::EOpp: return eopp;
    }
    return 0.0;
}

void Multipliers::set(ConstraintId id, double value) {
    switch (id) {
        case ConstraintId::C1: c1 = value; break;
        case ConstraintId::C2: c2 = value; break;
        case ConstraintId::EO: eo = value; break;
        case ConstraintId::EOpp: eopp = value; break;
    }
}

void Multipliers::clamp_all() {
    for (ConstraintId id : kAllConstraints)
        set(id, std::clamp(get(id), kLambdaMin, kLambdaMax));
}

double BatchEstimates::constraint(ConstraintId id) const {
    switch (id) {
        case ConstraintId::C1: return c1;
        case ConstraintId::C2: return c2;
        case ConstraintId::EO: return c_eo;
        case ConstraintId::EOpp: return c_eopp;
    }
    return 0.0;
}

// ---------------------------------------------------------------- batches

BatchTensors make_batch(const Tensor& x, const std::vector<int>& u, const std::vector<int>& y,
                        const std::vector<int>& rows, int group_count, int z_dim,
                        RngStream& noise_rng) {
    if (rows.empty()) throw std::invalid_argument("make_batch: empty batch");
    BatchTensors b;
    int n = static_cast<int>(rows.size());
    b.x = Tensor(n, x.cols());
    b.u.resize(n);
    if (!y.empty()) b.y.resize(n);
    for (int i = 0; i < n; ++i) {
        int src = rows[i];
        for (int c = 0; c < x.cols(); ++c) b.x.at(i, c) = x.at(src, c);
        b.u[i] = u[src];
        if (!y.empty()) b.y[i] = y[src];
    }
    b.u_onehot = one_hot(b.u, group_count);
    b.noise = noise_rng.normal_tensor(n, z_dim);
    return b;
}

// ---------------------------------------------------------------- graph builders

namespace {

// -mean log p_theta(x|z,u): softplus(d) - x.*d over Bernoulli features plus
// 0.5 (x - d)^2 (+ normalization) over Gaussian features.
int recon_node(Tape& t, const DecoderNodes& dec, int z, int u_onehot, const Tensor& x,
               const std::vector<uint8_t>& mask) {
    int d = decode_on_tape(t, dec, z, u_onehot);
    int B = x.rows();
    int n_gauss = 0;
    Tensor mb(B, x.cols()), xb(B, x.cols()), xg(B, x.cols());
    for (int c = 0; c < x.cols(); ++c)
        if (!mask[c]) ++n_gauss;
    for (int r = 0; r < B; ++r) {
        for (int c = 0; c < x.cols(); ++c) {
            if (mask[c]) {
                mb.at(r, c) = 1.0;
                xb.at(r, c) = x.at(r, c);
            } else {
                xg.at(r, c) = x.at(r, c);
            }
        }
    }
    Tensor mg(B, x.cols());
    for (size_t i = 0; i < mg.size(); ++i) mg[i] = 1.0 - mb[i];

    int bin_neg = t.sub(t.mul_const(t.softplus(d), mb), t.mul_const(d, std::move(xb)));
    int diff = t.sub(t.mul_const(d, std::move(mg)), t.leaf(std::move(xg)));
    int gauss_neg = t.scale(t.mul(diff, diff), 0.5);
    int total = t.scale(t.sum_all(t.add(bin_neg, gauss_neg)), 1.0 / B);
    return t.add_const(total, 0.5 * kLogTwoPi * n_gauss);
}

// batch-mean analytic KL(q(z|x,u) || N(0,I))
int c1_node(Tape& t, const PosteriorNodes& post) {
    int B = t.value(post.mean).rows();
    int e = t.exp(t.scale(post.log_std, 2.0));
    int m2 = t.mul(post.mean, post.mean);
    int half = t.scale(t.add_const(t.add(e, m2), -1.0), 0.5);
    return t.scale(t.sum_all(t.sub(half, post.log_std)), 1.0 / B);
}

// per-row log p_psi(u_r | .) - log-sum-exp, as a Bx1 node
int log_lik_rows(Tape& t, int logits, const std::vector<int>& u) {
    return t.sub(t.gather_cols(logits, u), t.log_sum_exp_rows(logits));
}

int c2_node(Tape& t, const AdversaryNodes& adv, int z, const std::vector<int>& u,
            const EmpiricalCategorical& p_u) {
    int logits = adversary_logits_on_tape(t, adv, z, -1, false);
    int ll = log_lik_rows(t, logits, u);
    double mean_log_pu = 0.0;
    for (int g : u) mean_log_pu += p_u.log_prob(g);
    mean_log_pu /= static_cast<double>(u.size());
    return t.add_const(t.scale(t.sum_all(ll), 1.0 / static_cast<double>(u.size())), -mean_log_pu);
}

// label-frequency-weighted per-slice adversarial estimates; eopp takes the
// y = 1 slice alone
std::pair<int, int> eo_nodes(Tape& t, const AdversaryNodes& adv_y, int z, const BatchTensors& batch,
                             const EmpiricalCategorical& p_u, double label_pos_freq) {
    int B = batch.size();
    Tensor y_col(B, 1);
    for (int r = 0; r < B; ++r) y_col.at(r, 0) = static_cast<double>(batch.y[r]);
    int logits = adversary_logits_on_tape(t, adv_y, z, t.leaf(std::move(y_col)), true);
    int ll = log_lik_rows(t, logits, batch.u);

    Tensor log_pu(B, 1);
    for (int r = 0; r < B; ++r) log_pu.at(r, 0) = p_u.log_prob(batch.u[r]);
    int ratio = t.sub(ll, t.leaf(std::move(log_pu)));

    int n1 = 0;
    for (int v : batch.y) n1 += v;
    int n0 = B - n1;

    Tensor w_eo(B, 1), w_eopp(B, 1);
    for (int r = 0; r < B; ++r) {
        if (batch.y[r] == 1) {
            if (n1 > 0) {
                w_eo.at(r, 0) = label_pos_freq / n1;
                w_eopp.at(r, 0) = 1.0 / n1;
            }
        } else if (n0 > 0) {
            w_eo.at(r, 0) = (1.0 - label_pos_freq) / n0;
        }
    }
    int c_eo = t.sum_all(t.mul_const(ratio, std::move(w_eo)));
    int c_eopp = t.sum_all(t.mul_const(ratio, std::move(w_eopp)));
    return {c_eo, c_eopp};
}

}  // namespace

LossGraph build_loss_graph(const ModelParams& params, const ModelConfig& cfg,
                           const BatchTensors& batch, const EmpiricalCategorical& p_u,
                           double label_pos_freq, bool want_eo_terms) {
    if (batch.size() == 0) throw std::invalid_argument("build_loss_graph: empty batch");
    LossGraph g;
    Tape& t = g.tape;
    g.enc = put_on_tape(t, params.enc);
    g.dec = put_on_tape(t, params.dec);
    g.adv = put_on_tape(t, params.adv);

    int x = t.leaf(batch.x);
    int u_onehot = t.leaf(batch.u_onehot);
    int noise = t.leaf(batch.noise);

    g.post = encode_on_tape(t, g.enc, x, u_onehot);
    g.z = reparameterize_on_tape(t, g.post, noise);

    g.l_r = recon_node(t, g.dec, g.z, u_onehot, batch.x, cfg.binary_feature_mask);
    g.c1 = c1_node(t, g.post);
    g.c2 = c2_node(t, g.adv, g.z, batch.u, p_u);

    if (want_eo_terms) {
        if (batch.y.empty()) throw std::invalid_argument("build_loss_graph: EO terms need labels");
        if (!params.adv_y) throw std::invalid_argument("build_loss_graph: EO terms need adv_y");
        g.adv_y = put_on_tape(t, *params.adv_y);
        g.has_adv_y = true;
        auto [eo, eopp] = eo_nodes(t, g.adv_y, g.z, batch, p_u, label_pos_freq);
        g.c_eo = eo;
        g.c_eopp = eopp;
    }
    return g;
}

AdversaryGraph build_adversary_graph(const EncoderParams& enc, const AdversaryParams& adv,
                                     const ModelConfig& /*cfg*/, const BatchTensors& batch,
                                     bool label_conditioned) {
    if (batch.size() == 0) throw std::invalid_argument("build_adversary_graph: empty batch");
    AdversaryGraph g;
    Tape& t = g.tape;
    EncoderNodes enc_n = put_on_tape(t, enc);
    g.adv = put_on_tape(t, adv);

    int x = t.leaf(batch.x);
    int u_onehot = t.leaf(batch.u_onehot);
    int noise = t.leaf(batch.noise);
    PosteriorNodes post = encode_on_tape(t, enc_n, x, u_onehot);
    int z = reparameterize_on_tape(t, post, noise);

    int y_col = -1;
    if (label_conditioned) {
        if (batch.y.empty()) throw std::invalid_argument("build_adversary_graph: labels missing");
        Tensor yc(batch.size(), 1);
        for (int r = 0; r < batch.size(); ++r) yc.at(r, 0) = static_cast<double>(batch.y[r]);
        y_col = t.leaf(std::move(yc));
    }
    int logits = adversary_logits_on_tape(t, g.adv, z, y_col, label_conditioned);
    int ll = log_lik_rows(t, logits, batch.u);
    g.loss = t.scale(t.sum_all(ll), -1.0 / batch.size());
    return g;
}

// ---------------------------------------------------------------- scalar wrappers

double recon_loss(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg) {
    LossGraph g = build_loss_graph(p, cfg, batch, EmpiricalCategorical{Tensor::row({0.5, 0.5}), 2}, 0.0, false);
    return g.tape.value(g.l_r).item();
}

double c1_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& /*cfg*/) {
    Tape t;
    EncoderNodes enc = put_on_tape(t, p.enc);
    PosteriorNodes post = encode_on_tape(t, enc, t.leaf(batch.x), t.leaf(batch.u_onehot));
    return t.value(c1_node(t, post)).item();
}

double c2_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg,
               const EmpiricalCategorical& p_u) {
    LossGraph g = build_loss_graph(p, cfg, batch, p_u, 0.0, false);
    return g.tape.value(g.c2).item();
}

double adversary_loss(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg) {
    AdversaryGraph g = build_adversary_graph(p.enc, p.adv, cfg, batch, false);
    return g.tape.value(g.loss).item();
}

double ceo_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg,
                const EmpiricalCategorical& p_u, double label_pos_freq) {
    LossGraph g = build_loss_graph(p, cfg, batch, p_u, label_pos_freq, true);
    return g.tape.value(g.c_eo).item();
}

double ceopp_term(const BatchTensors& batch, const ModelParams& p, const ModelConfig& cfg,
                  const EmpiricalCategorical& p_u) {
    LossGraph g = build_loss_graph(p, cfg, batch, p_u, 0.5, true);
    return g.tape.value(g.c_eopp).item();
}

// ---------------------------------------------------------------- losses over estimates

double mifr_loss(const BatchEstimates& est, const Multipliers& lambda) {
    double loss = est.l_r;
    for (ConstraintId id : kAllConstraints) loss += lambda.get(id) * est.constraint(id);
    return loss;
}

double lmifr_loss(const BatchEstimates& est, const Multipliers& lambda, const ConstraintSpec& spec) {
    double loss = est.l_r;
    for (ConstraintId id : kAllConstraints)
        if (spec.enabled(id)) loss += lambda.get(id) * (est.constraint(id) - spec.eps(id));
    return loss;
}

Multipliers lambda_ascent_step(const Multipliers& lambda, const BatchEstimates& est,
                               const ConstraintSpec& spec, double eta_lambda) {
    if (eta_lambda <= 0.0) throw std::invalid_argument("lambda_ascent_step: eta must be positive");
    Multipliers out = lambda;
    for (ConstraintId id : kAllConstraints) {
        if (!spec.enabled(id)) continue;
        double next = lambda.get(id) + eta_lambda * (est.constraint(id) - spec.eps(id));
        out.set(id, std::clamp(next, kLambdaMin, kLambdaMax));
    }
    return out;
}

}  // namespace fairrep
