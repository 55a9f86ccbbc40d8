#include "fairrep/model.hpp"

#include <cmath>
#include <stdexcept>

#include "fairrep/activations.hpp"

namespace fairrep {

void ModelConfig::validate() const {
    if (x_dim < 1) throw std::invalid_argument("ModelConfig: x_dim must be >= 1");
    if (u_group_count < 2) throw std::invalid_argument("ModelConfig: u_group_count must be >= 2");
    if (z_dim < 1) throw std::invalid_argument("ModelConfig: z_dim must be >= 1");
    if (hidden_dim < 1) throw std::invalid_argument("ModelConfig: hidden_dim must be >= 1");
    if (static_cast<int>(binary_feature_mask.size()) != x_dim)
        throw std::invalid_argument("ModelConfig: binary_feature_mask length must equal x_dim");
}

std::vector<Tensor*> EncoderParams::tensors() { return {&w1, &b1, &w_mean, &b_mean, &w_lstd, &b_lstd}; }
std::vector<const Tensor*> EncoderParams::tensors() const { return {&w1, &b1, &w_mean, &b_mean, &w_lstd, &b_lstd}; }
std::vector<Tensor*> DecoderParams::tensors() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Tensor*> DecoderParams::tensors() const { return {&w1, &b1, &w2, &b2}; }
std::vector<Tensor*> AdversaryParams::tensors() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Tensor*> AdversaryParams::tensors() const { return {&w1, &b1, &w2, &b2}; }

namespace {
Tensor fan_in_init(int rows, int cols, RngStream& rng) {
    Tensor w(rows, cols);
    double s = 1.0 / std::sqrt(static_cast<double>(rows));
    for (size_t i = 0; i < w.size(); ++i) w[i] = s * rng.normal();
    return w;
}

AdversaryParams init_adversary(const ModelConfig& c, RngStream rng, bool label_conditioned) {
    AdversaryParams a;
    int in = c.z_dim + (label_conditioned ? 1 : 0);
    a.w1 = fan_in_init(in, c.hidden_dim, rng);
    a.b1 = Tensor(1, c.hidden_dim);
    a.w2 = fan_in_init(c.hidden_dim, c.u_group_count, rng);
    a.b2 = Tensor(1, c.u_group_count);
    a.label_conditioned = label_conditioned;
    return a;
}
}  // namespace

ModelParams init_params(const ModelConfig& c, uint64_t seed) {
    c.validate();
    RngStream root(seed);
    ModelParams p;

    RngStream enc_rng = root.split(1);
    int enc_in = c.x_dim + c.u_group_count;
    p.enc.w1 = fan_in_init(enc_in, c.hidden_dim, enc_rng);
    p.enc.b1 = Tensor(1, c.hidden_dim);
    p.enc.w_mean = fan_in_init(c.hidden_dim, c.z_dim, enc_rng);
    p.enc.b_mean = Tensor(1, c.z_dim);
    p.enc.w_lstd = fan_in_init(c.hidden_dim, c.z_dim, enc_rng);
    p.enc.b_lstd = Tensor(1, c.z_dim);

    RngStream dec_rng = root.split(2);
    int dec_in = c.z_dim + c.u_group_count;
    p.dec.w1 = fan_in_init(dec_in, c.hidden_dim, dec_rng);
    p.dec.b1 = Tensor(1, c.hidden_dim);
    p.dec.w2 = fan_in_init(c.hidden_dim, c.x_dim, dec_rng);
    p.dec.b2 = Tensor(1, c.x_dim);

    p.adv = init_adversary(c, root.split(3), false);
    if (c.label_conditioned_adversaries) p.adv_y = init_adversary(c, root.split(4), true);
    return p;
}

double smooth_clamp_log_std(double t) {
    const double b = kLogStdSharpness;
    return t - softplus(b * (t - kLogStdHi)) / b + softplus(b * (kLogStdLo - t)) / b;
}

Tensor one_hot(const std::vector<int>& u, int group_count) {
    Tensor t(static_cast<int>(u.size()), group_count);
    for (size_t r = 0; r < u.size(); ++r) {
        if (u[r] < 0 || u[r] >= group_count) throw std::invalid_argument("one_hot: group id out of range");
        t.at(static_cast<int>(r), u[r]) = 1.0;
    }
    return t;
}

EncoderNodes put_on_tape(Tape& t, const EncoderParams& p) {
    return {t.leaf(p.w1), t.leaf(p.b1), t.leaf(p.w_mean), t.leaf(p.b_mean), t.leaf(p.w_lstd), t.leaf(p.b_lstd)};
}
DecoderNodes put_on_tape(Tape& t, const DecoderParams& p) {
    return {t.leaf(p.w1), t.leaf(p.b1), t.leaf(p.w2), t.leaf(p.b2)};
}
AdversaryNodes put_on_tape(Tape& t, const AdversaryParams& p) {
    return {t.leaf(p.w1), t.leaf(p.b1), t.leaf(p.w2), t.leaf(p.b2)};
}

namespace {
// t - sp(b(t-hi))/b + sp(b(lo-t))/b on the tape
int smooth_clamp_on_tape(Tape& t, int raw) {
    const double b = kLogStdSharpness;
    int upper = t.scale(t.softplus(t.add_const(t.scale(raw, b), -b * kLogStdHi)), 1.0 / b);
    int lower = t.scale(t.softplus(t.add_const(t.scale(raw, -b), b * kLogStdLo)), 1.0 / b);
    return t.add(t.sub(raw, upper), lower);
}
}  // namespace

PosteriorNodes encode_on_tape(Tape& t, const EncoderNodes& enc, int x, int u_onehot) {
    int in = t.concat_cols(x, u_onehot);
    int h = t.softplus(t.add_rowvec(t.matmul(in, enc.w1), enc.b1));
    int mean = t.add_rowvec(t.matmul(h, enc.w_mean), enc.b_mean);
    int raw = t.add_rowvec(t.matmul(h, enc.w_lstd), enc.b_lstd);
    return {mean, smooth_clamp_on_tape(t, raw)};
}

int reparameterize_on_tape(Tape& t, const PosteriorNodes& post, int noise) {
    return t.add(post.mean, t.mul(t.exp(post.log_std), noise));
}

int decode_on_tape(Tape& t, const DecoderNodes& dec, int z, int u_onehot) {
    int in = t.concat_cols(z, u_onehot);
    int h = t.softplus(t.add_rowvec(t.matmul(in, dec.w1), dec.b1));
    return t.add_rowvec(t.matmul(h, dec.w2), dec.b2);
}

int adversary_logits_on_tape(Tape& t, const AdversaryNodes& adv, int z, int y_col, bool label_conditioned) {
    int in = z;
    if (label_conditioned) {
        if (y_col < 0) throw std::invalid_argument("adversary: label-conditioned but no y supplied");
        in = t.concat_cols(z, y_col);
    } else if (y_col >= 0) {
        throw std::invalid_argument("adversary: y supplied but adversary is not label-conditioned");
    }
    int h = t.softplus(t.add_rowvec(t.matmul(in, adv.w1), adv.b1));
    return t.add_rowvec(t.matmul(h, adv.w2), adv.b2);
}

namespace {
// row (1 x in) @ w (in x out) + b
void affine_row(const double* in, int in_dim, const Tensor& w, const Tensor& b, double* out) {
    for (int j = 0; j < w.cols(); ++j) out[j] = b[j];
    for (int k = 0; k < in_dim; ++k) {
        double v = in[k];
        if (v == 0.0) continue;
        const double* wrow = w.data() + static_cast<size_t>(k) * w.cols();
        for (int j = 0; j < w.cols(); ++j) out[j] += v * wrow[j];
    }
}
}  // namespace

DiagGaussian encode(const EncoderParams& enc, const ModelConfig& cfg, const double* x_row, int u) {
    std::vector<double> in(cfg.x_dim + cfg.u_group_count, 0.0);
    for (int i = 0; i < cfg.x_dim; ++i) in[i] = x_row[i];
    if (u < 0 || u >= cfg.u_group_count) throw std::invalid_argument("encode: group id out of range");
    in[cfg.x_dim + u] = 1.0;

    std::vector<double> h(cfg.hidden_dim);
    affine_row(in.data(), static_cast<int>(in.size()), enc.w1, enc.b1, h.data());
    for (double& v : h) v = softplus(v);

    DiagGaussian g{Tensor(1, cfg.z_dim), Tensor(1, cfg.z_dim)};
    affine_row(h.data(), cfg.hidden_dim, enc.w_mean, enc.b_mean, g.mean.data());
    affine_row(h.data(), cfg.hidden_dim, enc.w_lstd, enc.b_lstd, g.log_std.data());
    for (int i = 0; i < cfg.z_dim; ++i) g.log_std[i] = smooth_clamp_log_std(g.log_std[i]);
    return g;
}

void encode_batch(const EncoderParams& enc, const ModelConfig& cfg,
                  const Tensor& x, const std::vector<int>& u,
                  Tensor& means_out, Tensor& log_stds_out) {
    if (x.rows() != static_cast<int>(u.size())) throw std::invalid_argument("encode_batch: row count mismatch");
    means_out = Tensor(x.rows(), cfg.z_dim);
    log_stds_out = Tensor(x.rows(), cfg.z_dim);
    const int n = x.rows();
#pragma omp parallel for schedule(static)
    for (int r = 0; r < n; ++r) {
        DiagGaussian g = encode(enc, cfg, x.data() + static_cast<size_t>(r) * x.cols(), u[r]);
        for (int i = 0; i < cfg.z_dim; ++i) {
            means_out.at(r, i) = g.mean[i];
            log_stds_out.at(r, i) = g.log_std[i];
        }
    }
}

Tensor decode(const DecoderParams& dec, const ModelConfig& cfg, const Tensor& z_row, int u) {
    if (z_row.size() != static_cast<size_t>(cfg.z_dim)) throw std::invalid_argument("decode: z dimension mismatch");
    std::vector<double> in(cfg.z_dim + cfg.u_group_count, 0.0);
    for (int i = 0; i < cfg.z_dim; ++i) in[i] = z_row[i];
    if (u < 0 || u >= cfg.u_group_count) throw std::invalid_argument("decode: group id out of range");
    in[cfg.z_dim + u] = 1.0;

    std::vector<double> h(cfg.hidden_dim);
    affine_row(in.data(), static_cast<int>(in.size()), dec.w1, dec.b1, h.data());
    for (double& v : h) v = softplus(v);

    Tensor out(1, cfg.x_dim);
    affine_row(h.data(), cfg.hidden_dim, dec.w2, dec.b2, out.data());
    return out;
}

Tensor adversary_logits(const AdversaryParams& adv, const ModelConfig& cfg,
                        const Tensor& z_row, std::optional<int> y) {
    if (adv.label_conditioned != y.has_value())
        throw std::invalid_argument("adversary_logits: y must be supplied iff label-conditioned");
    std::vector<double> in(z_row.data(), z_row.data() + z_row.size());
    if (y) in.push_back(static_cast<double>(*y));

    std::vector<double> h(cfg.hidden_dim);
    affine_row(in.data(), static_cast<int>(in.size()), adv.w1, adv.b1, h.data());
    for (double& v : h) v = softplus(v);

    Tensor out(1, cfg.u_group_count);
    affine_row(h.data(), cfg.hidden_dim, adv.w2, adv.b2, out.data());
    return out;
}

}  // namespace fairrep
