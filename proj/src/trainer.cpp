#include "fairrep/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fairrep/activations.hpp"
#include <json.hpp>

namespace fairrep {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr char kCheckpointMagic[4] = {'F', 'R', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;
constexpr const char* kLibraryTag = "fairrep-1";

// rng purposes; each (seed, purpose, iteration[, inner step]) tuple names one
// stream, so a resumed run replays exactly the draws a straight run would make
enum : uint64_t { kRngShuffle = 1, kRngOuterNoise = 2, kRngInnerRows = 3, kRngInnerNoise = 4 };

std::vector<int> encoder_node_ids(const EncoderNodes& n) {
    return {n.w1, n.b1, n.w_mean, n.b_mean, n.w_lstd, n.b_lstd};
}
std::vector<int> decoder_node_ids(const DecoderNodes& n) { return {n.w1, n.b1, n.w2, n.b2}; }
std::vector<int> adversary_node_ids(const AdversaryNodes& n) { return {n.w1, n.b1, n.w2, n.b2}; }

void apply_adam(std::vector<Tensor*> params, const std::vector<Tensor>& grads,
                const std::vector<int>& node_ids, AdamState& state, double lr) {
    std::vector<const Tensor*> g;
    g.reserve(node_ids.size());
    for (int id : node_ids) g.push_back(&grads[id]);
    adam_step(params, g, state, lr);
}

std::vector<int> epoch_order(int n, uint64_t seed, int epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    RngStream s = RngStream(seed).split(kRngShuffle).split(static_cast<uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(s.below(static_cast<uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

// adversary cross-entropy with z taken directly from the prior draw
struct PinnedAdvGraph {
    Tape tape;
    AdversaryNodes adv;
    int loss = -1;
    int mean_ll = -1;
};

PinnedAdvGraph build_pinned_adversary_graph(const AdversaryParams& adv, const BatchTensors& batch) {
    PinnedAdvGraph g;
    Tape& t = g.tape;
    g.adv = put_on_tape(t, adv);
    int z = t.leaf(batch.noise);
    int logits = adversary_logits_on_tape(t, g.adv, z, -1, false);
    int ll = t.sub(t.gather_cols(logits, batch.u), t.log_sum_exp_rows(logits));
    g.mean_ll = t.scale(t.sum_all(ll), 1.0 / batch.size());
    g.loss = t.scale(g.mean_ll, -1.0);
    return g;
}

double plain_recon_loss(const DecoderParams& dec, const ModelConfig& cfg, const Tensor& z,
                        const BatchTensors& batch) {
    double total = 0.0;
    Tensor z_row(1, z.cols());
    for (int r = 0; r < batch.size(); ++r) {
        for (int c = 0; c < z.cols(); ++c) z_row.at(0, c) = z.at(r, c);
        Tensor d = decode(dec, cfg, z_row, batch.u[r]);
        for (int c = 0; c < batch.x.cols(); ++c) {
            double xv = batch.x.at(r, c);
            double dv = d.at(0, c);
            if (cfg.binary_feature_mask[c])
                total += softplus(dv) - xv * dv;
            else
                total += 0.5 * (xv - dv) * (xv - dv) + 0.5 * kLogTwoPi;
        }
    }
    return total / batch.size();
}

// ------------------------------------------------------------- binary io

void wr_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void wr_u32(std::ostream& out, uint32_t v) { wr_bytes(out, &v, sizeof v); }
void wr_u64(std::ostream& out, uint64_t v) { wr_bytes(out, &v, sizeof v); }
void wr_i64(std::ostream& out, int64_t v) { wr_bytes(out, &v, sizeof v); }
void wr_f64(std::ostream& out, double v) { wr_bytes(out, &v, sizeof v); }
void wr_str(std::ostream& out, const std::string& s) {
    wr_u64(out, s.size());
    wr_bytes(out, s.data(), s.size());
}
void wr_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    wr_str(out, name);
    wr_u32(out, static_cast<uint32_t>(t.rows()));
    wr_u32(out, static_cast<uint32_t>(t.cols()));
    wr_bytes(out, t.data(), t.size() * sizeof(double));
}

struct Reader {
    std::string buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    void rd_bytes(void* p, size_t n) {
        need(n);
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    uint32_t rd_u32() { uint32_t v; rd_bytes(&v, sizeof v); return v; }
    uint64_t rd_u64() { uint64_t v; rd_bytes(&v, sizeof v); return v; }
    int64_t rd_i64() { int64_t v; rd_bytes(&v, sizeof v); return v; }
    double rd_f64() { double v; rd_bytes(&v, sizeof v); return v; }
    std::string rd_str() {
        uint64_t n = rd_u64();
        need(n);
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }
    Tensor rd_tensor(std::string* name) {
        *name = rd_str();
        int rows = static_cast<int>(rd_u32());
        int cols = static_cast<int>(rd_u32());
        Tensor t(rows, cols);
        rd_bytes(t.data(), t.size() * sizeof(double));
        return t;
    }
};

void wr_adam(std::ostream& out, const std::string& prefix, const AdamState& a) {
    wr_i64(out, a.step);
    wr_u32(out, static_cast<uint32_t>(a.m.size()));
    for (size_t i = 0; i < a.m.size(); ++i) {
        wr_tensor(out, prefix + ".m" + std::to_string(i), a.m[i]);
        wr_tensor(out, prefix + ".v" + std::to_string(i), a.v[i]);
    }
}

AdamState rd_adam(Reader& in, const std::string& prefix) {
    AdamState a;
    a.step = in.rd_i64();
    uint32_t n = in.rd_u32();
    a.m.resize(n);
    a.v.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        std::string name;
        a.m[i] = in.rd_tensor(&name);
        if (name != prefix + ".m" + std::to_string(i))
            throw std::runtime_error("checkpoint: unexpected tensor name " + name);
        a.v[i] = in.rd_tensor(&name);
        if (name != prefix + ".v" + std::to_string(i))
            throw std::runtime_error("checkpoint: unexpected tensor name " + name);
    }
    return a;
}

void expect_tensor(Reader& in, const std::string& expected, Tensor& dst) {
    std::string name;
    dst = in.rd_tensor(&name);
    if (name != expected) throw std::runtime_error("checkpoint: unexpected tensor name " + name);
}

}  // namespace

// ------------------------------------------------------------- config

bool TrainConfig::wants_eo_terms() const { return model.label_conditioned_adversaries; }

void TrainConfig::validate(const TabularDataset& data) const {
    model.validate();
    constraints.validate();
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (adversary_steps < 1) throw std::invalid_argument("TrainConfig: adversary_steps must be >= 1");
    if (eta_lambda <= 0.0) throw std::invalid_argument("TrainConfig: eta_lambda must be positive");
    if (!(ema_alpha >= 0.0 && ema_alpha < 1.0))
        throw std::invalid_argument("TrainConfig: ema_alpha must be in [0, 1)");
    if (log_every < 1) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
    if (mode == TrainMode::LMIFR && !constraints.any_enabled())
        throw std::invalid_argument("TrainConfig: LMIFR requires at least one enabled constraint");
    if (model.x_dim != data.x_dim())
        throw std::invalid_argument("TrainConfig: model x_dim does not match dataset");
    if (model.u_group_count != data.group_count)
        throw std::invalid_argument("TrainConfig: model group count does not match dataset");
    if (model.binary_feature_mask != data.binary_feature_mask)
        throw std::invalid_argument("TrainConfig: feature mask does not match dataset");
    if (constraints.needs_labels() && !model.label_conditioned_adversaries)
        throw std::invalid_argument(
            "TrainConfig: EO/EOpp constraints need label-conditioned adversaries");
    if (wants_eo_terms() && !data.has_labels)
        throw std::invalid_argument("TrainConfig: label-conditioned adversaries need labels");
    if (pin_encoder_to_prior && model.label_conditioned_adversaries)
        throw std::invalid_argument(
            "TrainConfig: pin_encoder_to_prior supports the unconditioned adversary only");
}

long steps_per_epoch(int n, int batch_size) {
    return (static_cast<long>(n) + batch_size - 1) / batch_size;
}

// ------------------------------------------------------------- metrics log

void write_metrics_header(std::ostream& out) {
    out << "iteration,epoch,L_r,C1,C2,C_EO,C_EOpp,lambda1,lambda2,lambda_EO,lambda_EOpp,lr\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
    char buf[400];
    std::snprintf(buf, sizeof buf,
                  "%ld,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  row.iteration, row.epoch, row.est.l_r, row.est.c1, row.est.c2, row.est.c_eo,
                  row.est.c_eopp, row.lambda.c1, row.lambda.c2, row.lambda.eo, row.lambda.eopp,
                  row.lr);
    out << buf;
}

// ------------------------------------------------------------- training loop

TrainResult train(const TrainConfig& config, const TabularDataset& data,
                  std::ostream* metrics_out, const std::optional<TrainState>& resume_from,
                  const std::string& diagnostic_dump_path) {
    config.validate(data);
    data.validate();

    const int n = data.n();
    const int B = std::min(config.batch_size, n);
    const long spe = steps_per_epoch(n, B);
    const long total_iters = spe * config.epochs;
    const bool lmifr = config.mode == TrainMode::LMIFR;
    const bool want_eo = config.wants_eo_terms();

    TrainState st;
    if (resume_from) {
        st = *resume_from;
        if (st.iteration > total_iters)
            throw std::invalid_argument("train: resume state is past the configured epoch count");
    } else {
        st.params = init_params(config.model, config.seed);
        st.lambda = config.initial_lambda;
        // dual variables live in the clamp range; fixed MIFR multipliers may
        // sit anywhere (the sweep grid includes 0)
        if (lmifr) st.lambda.clamp_all();
        st.adam_enc = AdamState::for_params(st.params.enc.tensors());
        st.adam_dec = AdamState::for_params(st.params.dec.tensors());
        st.adam_adv = AdamState::for_params(st.params.adv.tensors());
        if (st.params.adv_y) st.adam_adv_y = AdamState::for_params(st.params.adv_y->tensors());
    }

    EmpiricalCategorical p_u = fit_empirical(data.u, data.group_count);
    double label_pos_freq = 0.0;
    if (data.has_labels) {
        for (int v : data.y) label_pos_freq += v;
        label_pos_freq /= n;
    }

    RngStream root(config.seed);
    TrainResult result;
    if (metrics_out && st.iteration == 0) write_metrics_header(*metrics_out);

    std::vector<int> order;
    long order_epoch = -1;

    for (long it = st.iteration; it < total_iters; ++it) {
        long epoch = it / spe;
        long batch_idx = it % spe;
        double lr = config.lr.at(it);

        if (epoch != order_epoch) {
            order = epoch_order(n, config.seed, static_cast<int>(epoch));
            order_epoch = epoch;
        }

        // --- D adversary maximization steps on independently resampled batches
        for (int d = 0; d < config.adversary_steps; ++d) {
            uint64_t step_tag = static_cast<uint64_t>(it) * 1000003ULL + static_cast<uint64_t>(d);
            RngStream rows_rng = root.split(kRngInnerRows).split(step_tag);
            RngStream noise_rng = root.split(kRngInnerNoise).split(step_tag);
            std::vector<int> rows(B);
            for (int i = 0; i < B; ++i) rows[i] = static_cast<int>(rows_rng.below(n));
            BatchTensors inner =
                make_batch(data.x, data.u, data.y, rows, data.group_count, config.model.z_dim, noise_rng);

            if (config.pin_encoder_to_prior) {
                PinnedAdvGraph g = build_pinned_adversary_graph(st.params.adv, inner);
                std::vector<Tensor> grads = g.tape.backward(g.loss);
                apply_adam(st.params.adv.tensors(), grads, adversary_node_ids(g.adv), st.adam_adv, lr);
            } else {
                AdversaryGraph g =
                    build_adversary_graph(st.params.enc, st.params.adv, config.model, inner, false);
                std::vector<Tensor> grads = g.tape.backward(g.loss);
                apply_adam(st.params.adv.tensors(), grads, adversary_node_ids(g.adv), st.adam_adv, lr);
                if (want_eo) {
                    AdversaryGraph gy = build_adversary_graph(st.params.enc, *st.params.adv_y,
                                                              config.model, inner, true);
                    std::vector<Tensor> grads_y = gy.tape.backward(gy.loss);
                    apply_adam(st.params.adv_y->tensors(), grads_y, adversary_node_ids(gy.adv),
                               st.adam_adv_y, lr);
                }
            }
        }

        // --- one encoder/decoder minimization step on the outer batch
        RngStream outer_noise = root.split(kRngOuterNoise).split(static_cast<uint64_t>(it));
        int lo = static_cast<int>(batch_idx) * B;
        int hi = std::min(lo + B, n);
        std::vector<int> rows(order.begin() + lo, order.begin() + hi);
        BatchTensors batch =
            make_batch(data.x, data.u, data.y, rows, data.group_count, config.model.z_dim, outer_noise);

        BatchEstimates est;
        est.batch_size = batch.size();

        if (config.pin_encoder_to_prior) {
            PinnedAdvGraph g = build_pinned_adversary_graph(st.params.adv, batch);
            double mean_log_pu = 0.0;
            for (int u : batch.u) mean_log_pu += p_u.log_prob(u);
            mean_log_pu /= batch.size();
            est.c1 = 0.0;
            est.c2 = g.tape.value(g.mean_ll).item() - mean_log_pu;
            est.l_r = plain_recon_loss(st.params.dec, config.model, batch.noise, batch);
        } else {
            LossGraph g =
                build_loss_graph(st.params, config.model, batch, p_u, label_pos_freq, want_eo);
            Tape& t = g.tape;
            est.l_r = t.value(g.l_r).item();
            est.c1 = t.value(g.c1).item();
            est.c2 = t.value(g.c2).item();
            if (want_eo) {
                est.c_eo = t.value(g.c_eo).item();
                est.c_eopp = t.value(g.c_eopp).item();
            }

            int total = g.l_r;
            for (ConstraintId id : kAllConstraints) {
                if (lmifr && !config.constraints.enabled(id)) continue;
                int node = -1;
                switch (id) {
                    case ConstraintId::C1: node = g.c1; break;
                    case ConstraintId::C2: node = g.c2; break;
                    case ConstraintId::EO: node = g.c_eo; break;
                    case ConstraintId::EOpp: node = g.c_eopp; break;
                }
                if (node < 0) continue;
                double coeff = st.lambda.get(id);
                if (coeff != 0.0) total = t.add(total, t.scale(node, coeff));
            }

            std::vector<Tensor> grads = t.backward(total);
            apply_adam(st.params.enc.tensors(), grads, encoder_node_ids(g.enc), st.adam_enc, lr);
            apply_adam(st.params.dec.tensors(), grads, decoder_node_ids(g.dec), st.adam_dec, lr);
        }

        bool finite = std::isfinite(est.l_r) && std::isfinite(est.c1) && std::isfinite(est.c2) &&
                      std::isfinite(est.c_eo) && std::isfinite(est.c_eopp);
        if (!finite) {
            if (!diagnostic_dump_path.empty())
                save_checkpoint(st, config, data.schema_fingerprint(), diagnostic_dump_path);
            std::ostringstream msg;
            msg << "train: non-finite loss at iteration " << it << " (L_r=" << est.l_r
                << " C1=" << est.c1 << " C2=" << est.c2 << " C_EO=" << est.c_eo
                << " C_EOpp=" << est.c_eopp << ")";
            if (!diagnostic_dump_path.empty()) msg << "; state dumped to " << diagnostic_dump_path;
            throw std::runtime_error(msg.str());
        }

        if (!st.ema_init) {
            st.ema = est;
            st.ema_init = true;
        } else {
            double a = config.ema_alpha;
            st.ema.l_r = a * st.ema.l_r + (1 - a) * est.l_r;
            st.ema.c1 = a * st.ema.c1 + (1 - a) * est.c1;
            st.ema.c2 = a * st.ema.c2 + (1 - a) * est.c2;
            st.ema.c_eo = a * st.ema.c_eo + (1 - a) * est.c_eo;
            st.ema.c_eopp = a * st.ema.c_eopp + (1 - a) * est.c_eopp;
            st.ema.batch_size = est.batch_size;
        }

        if (lmifr) {
            const BatchEstimates& fed = config.raw_constraint_ascent ? est : st.ema;
            st.lambda = lambda_ascent_step(st.lambda, fed, config.constraints, config.eta_lambda);
        }

        st.iteration = it + 1;

        if (st.iteration % config.log_every == 0 || st.iteration == total_iters) {
            MetricsRow row{st.iteration, static_cast<int>(epoch), est, st.lambda, lr};
            result.log.push_back(row);
            if (metrics_out) write_metrics_row(*metrics_out, row);
        }
    }

    result.state = std::move(st);
    return result;
}

// ------------------------------------------------------------- config json

std::string train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["mode"] = c.mode == TrainMode::MIFR ? "mifr" : "lmifr";
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["adversary_steps"] = c.adversary_steps;
    j["lr"] = {{"base_lr", c.lr.base_lr},
               {"decay_factor", c.lr.decay_factor},
               {"decay_every", c.lr.decay_every}};
    j["eta_lambda"] = c.eta_lambda;
    j["seed"] = c.seed;
    nlohmann::json eps;
    auto put_eps = [&](const char* key, double v) {
        if (std::isfinite(v))
            eps[key] = v;
        else
            eps[key] = nullptr;
    };
    put_eps("c1", c.constraints.eps_c1);
    put_eps("c2", c.constraints.eps_c2);
    put_eps("eo", c.constraints.eps_eo);
    put_eps("eopp", c.constraints.eps_eopp);
    j["constraints"] = eps;
    j["initial_lambda"] = {{"c1", c.initial_lambda.c1},
                           {"c2", c.initial_lambda.c2},
                           {"eo", c.initial_lambda.eo},
                           {"eopp", c.initial_lambda.eopp}};
    j["model"] = {{"x_dim", c.model.x_dim},
                  {"u_group_count", c.model.u_group_count},
                  {"z_dim", c.model.z_dim},
                  {"hidden_dim", c.model.hidden_dim},
                  {"binary_feature_mask", c.model.binary_feature_mask},
                  {"label_conditioned_adversaries", c.model.label_conditioned_adversaries}};
    j["ema_alpha"] = c.ema_alpha;
    j["raw_constraint_ascent"] = c.raw_constraint_ascent;
    j["log_every"] = c.log_every;
    j["pin_encoder_to_prior"] = c.pin_encoder_to_prior;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TrainConfig c;
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "mifr")
        c.mode = TrainMode::MIFR;
    else if (mode == "lmifr")
        c.mode = TrainMode::LMIFR;
    else
        throw std::invalid_argument("TrainConfig: mode must be \"mifr\" or \"lmifr\"");
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.adversary_steps = j.at("adversary_steps").get<int>();
    const auto& lr = j.at("lr");
    c.lr.base_lr = lr.at("base_lr").get<double>();
    c.lr.decay_factor = lr.at("decay_factor").get<double>();
    c.lr.decay_every = lr.at("decay_every").get<long>();
    c.eta_lambda = j.at("eta_lambda").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
    const auto& eps = j.at("constraints");
    auto get_eps = [&](const char* key) {
        const auto& v = eps.at(key);
        return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
    };
    c.constraints.eps_c1 = get_eps("c1");
    c.constraints.eps_c2 = get_eps("c2");
    c.constraints.eps_eo = get_eps("eo");
    c.constraints.eps_eopp = get_eps("eopp");
    const auto& lam = j.at("initial_lambda");
    c.initial_lambda.c1 = lam.at("c1").get<double>();
    c.initial_lambda.c2 = lam.at("c2").get<double>();
    c.initial_lambda.eo = lam.at("eo").get<double>();
    c.initial_lambda.eopp = lam.at("eopp").get<double>();
    const auto& m = j.at("model");
    c.model.x_dim = m.at("x_dim").get<int>();
    c.model.u_group_count = m.at("u_group_count").get<int>();
    c.model.z_dim = m.at("z_dim").get<int>();
    c.model.hidden_dim = m.at("hidden_dim").get<int>();
    c.model.binary_feature_mask = m.at("binary_feature_mask").get<std::vector<uint8_t>>();
    c.model.label_conditioned_adversaries = m.at("label_conditioned_adversaries").get<bool>();
    c.ema_alpha = j.at("ema_alpha").get<double>();
    c.raw_constraint_ascent = j.at("raw_constraint_ascent").get<bool>();
    c.log_every = j.at("log_every").get<int>();
    c.pin_encoder_to_prior = j.value("pin_encoder_to_prior", false);
    return c;
}

// ------------------------------------------------------------- checkpoints

void save_checkpoint(const TrainState& state, const TrainConfig& config,
                     uint64_t schema_fingerprint, const std::string& path) {
    std::ostringstream body;
    wr_bytes(body, kCheckpointMagic, sizeof kCheckpointMagic);
    wr_u32(body, kCheckpointVersion);
    wr_str(body, kLibraryTag);
    wr_str(body, train_config_to_json(config));
    wr_u64(body, schema_fingerprint);
    wr_i64(body, state.iteration);

    uint8_t ema_init = state.ema_init ? 1 : 0;
    wr_bytes(body, &ema_init, 1);
    wr_f64(body, state.ema.l_r);
    wr_f64(body, state.ema.c1);
    wr_f64(body, state.ema.c2);
    wr_f64(body, state.ema.c_eo);
    wr_f64(body, state.ema.c_eopp);
    wr_u32(body, static_cast<uint32_t>(state.ema.batch_size));

    wr_f64(body, state.lambda.c1);
    wr_f64(body, state.lambda.c2);
    wr_f64(body, state.lambda.eo);
    wr_f64(body, state.lambda.eopp);

    uint8_t has_adv_y = state.params.adv_y ? 1 : 0;
    wr_bytes(body, &has_adv_y, 1);

    const char* enc_names[] = {"enc.w1", "enc.b1", "enc.w_mean", "enc.b_mean", "enc.w_lstd",
                               "enc.b_lstd"};
    auto enc_tensors = state.params.enc.tensors();
    wr_u32(body, static_cast<uint32_t>(enc_tensors.size()));
    for (size_t i = 0; i < enc_tensors.size(); ++i) wr_tensor(body, enc_names[i], *enc_tensors[i]);

    const char* dec_names[] = {"dec.w1", "dec.b1", "dec.w2", "dec.b2"};
    auto dec_tensors = state.params.dec.tensors();
    wr_u32(body, static_cast<uint32_t>(dec_tensors.size()));
    for (size_t i = 0; i < dec_tensors.size(); ++i) wr_tensor(body, dec_names[i], *dec_tensors[i]);

    const char* adv_names[] = {"adv.w1", "adv.b1", "adv.w2", "adv.b2"};
    auto adv_tensors = state.params.adv.tensors();
    wr_u32(body, static_cast<uint32_t>(adv_tensors.size()));
    for (size_t i = 0; i < adv_tensors.size(); ++i) wr_tensor(body, adv_names[i], *adv_tensors[i]);

    if (state.params.adv_y) {
        const char* advy_names[] = {"adv_y.w1", "adv_y.b1", "adv_y.w2", "adv_y.b2"};
        auto advy_tensors = state.params.adv_y->tensors();
        wr_u32(body, static_cast<uint32_t>(advy_tensors.size()));
        for (size_t i = 0; i < advy_tensors.size(); ++i)
            wr_tensor(body, advy_names[i], *advy_tensors[i]);
    }

    wr_adam(body, "adam_enc", state.adam_enc);
    wr_adam(body, "adam_dec", state.adam_dec);
    wr_adam(body, "adam_adv", state.adam_adv);
    if (state.params.adv_y) wr_adam(body, "adam_adv_y", state.adam_adv_y);

    std::string payload = body.str();
    uint64_t checksum = fnv1a(payload.data(), payload.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    wr_bytes(out, payload.data(), payload.size());
    wr_u64(out, checksum);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string all = ss.str();
    if (all.size() < sizeof(uint64_t) + sizeof kCheckpointMagic)
        throw std::runtime_error("load_checkpoint: file too short");

    size_t body_len = all.size() - sizeof(uint64_t);
    uint64_t stored_checksum;
    std::memcpy(&stored_checksum, all.data() + body_len, sizeof stored_checksum);
    if (fnv1a(all.data(), body_len) != stored_checksum)
        throw std::runtime_error("load_checkpoint: checksum mismatch (corrupt or tampered file)");

    Reader r;
    r.buf = all.substr(0, body_len);

    char magic[4];
    r.rd_bytes(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic bytes");
    uint32_t version = r.rd_u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
    std::string tag = r.rd_str();
    if (tag != kLibraryTag)
        throw std::runtime_error("load_checkpoint: library tag mismatch: " + tag);

    LoadedCheckpoint out;
    out.config = train_config_from_json(r.rd_str());
    out.schema_fingerprint = r.rd_u64();

    TrainState& st = out.state;
    st.iteration = r.rd_i64();

    uint8_t ema_init;
    r.rd_bytes(&ema_init, 1);
    st.ema_init = ema_init != 0;
    st.ema.l_r = r.rd_f64();
    st.ema.c1 = r.rd_f64();
    st.ema.c2 = r.rd_f64();
    st.ema.c_eo = r.rd_f64();
    st.ema.c_eopp = r.rd_f64();
    st.ema.batch_size = static_cast<int>(r.rd_u32());

    st.lambda.c1 = r.rd_f64();
    st.lambda.c2 = r.rd_f64();
    st.lambda.eo = r.rd_f64();
    st.lambda.eopp = r.rd_f64();

    uint8_t has_adv_y;
    r.rd_bytes(&has_adv_y, 1);

    if (r.rd_u32() != 6) throw std::runtime_error("load_checkpoint: bad encoder tensor count");
    expect_tensor(r, "enc.w1", st.params.enc.w1);
    expect_tensor(r, "enc.b1", st.params.enc.b1);
    expect_tensor(r, "enc.w_mean", st.params.enc.w_mean);
    expect_tensor(r, "enc.b_mean", st.params.enc.b_mean);
    expect_tensor(r, "enc.w_lstd", st.params.enc.w_lstd);
    expect_tensor(r, "enc.b_lstd", st.params.enc.b_lstd);

    if (r.rd_u32() != 4) throw std::runtime_error("load_checkpoint: bad decoder tensor count");
    expect_tensor(r, "dec.w1", st.params.dec.w1);
    expect_tensor(r, "dec.b1", st.params.dec.b1);
    expect_tensor(r, "dec.w2", st.params.dec.w2);
    expect_tensor(r, "dec.b2", st.params.dec.b2);

    if (r.rd_u32() != 4) throw std::runtime_error("load_checkpoint: bad adversary tensor count");
    expect_tensor(r, "adv.w1", st.params.adv.w1);
    expect_tensor(r, "adv.b1", st.params.adv.b1);
    expect_tensor(r, "adv.w2", st.params.adv.w2);
    expect_tensor(r, "adv.b2", st.params.adv.b2);

    if (has_adv_y) {
        AdversaryParams ay;
        ay.label_conditioned = true;
        if (r.rd_u32() != 4) throw std::runtime_error("load_checkpoint: bad adv_y tensor count");
        expect_tensor(r, "adv_y.w1", ay.w1);
        expect_tensor(r, "adv_y.b1", ay.b1);
        expect_tensor(r, "adv_y.w2", ay.w2);
        expect_tensor(r, "adv_y.b2", ay.b2);
        st.params.adv_y = std::move(ay);
    }

    st.adam_enc = rd_adam(r, "adam_enc");
    st.adam_dec = rd_adam(r, "adam_dec");
    st.adam_adv = rd_adam(r, "adam_adv");
    if (has_adv_y) st.adam_adv_y = rd_adam(r, "adam_adv_y");

    if (r.pos != r.buf.size()) throw std::runtime_error("load_checkpoint: trailing bytes");
    return out;
}

}  // namespace fairrep
