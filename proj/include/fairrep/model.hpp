#pragma once

#include <optional>
#include <vector>

#include "fairrep/dist.hpp"
#include "fairrep/rng.hpp"
#include "fairrep/tape.hpp"
#include "fairrep/tensor.hpp"

namespace fairrep {

struct ModelConfig {
    int x_dim = 0;
    int u_group_count = 2;
    int z_dim = 10;
    int hidden_dim = 50;
    std::vector<uint8_t> binary_feature_mask;  // 1 = Bernoulli head, 0 = Gaussian head
    bool label_conditioned_adversaries = false;

    void validate() const;
};

// Two-layer softplus MLPs; conditioning inputs are concatenated at the input
// layer. The encoder has mean and log_std heads, the decoder one output per
// feature, the adversary group logits.

struct EncoderParams {
    Tensor w1, b1;          // (x_dim + K) x h, 1 x h
    Tensor w_mean, b_mean;  // h x z, 1 x z
    Tensor w_lstd, b_lstd;  // h x z, 1 x z
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
};

struct DecoderParams {
    Tensor w1, b1;    // (z + K) x h, 1 x h
    Tensor w2, b2;    // h x x_dim, 1 x x_dim
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
};

struct AdversaryParams {
    Tensor w1, b1;    // (z [+1]) x h, 1 x h
    Tensor w2, b2;    // h x K, 1 x K
    bool label_conditioned = false;
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
};

struct ModelParams {
    EncoderParams enc;
    DecoderParams dec;
    AdversaryParams adv;                    // p(u|z)
    std::optional<AdversaryParams> adv_y;   // p(u|z,y) when label-conditioned constraints are on
};

/// Fan-in-scaled zero-mean init; biases zero. Deterministic in the seed.
ModelParams init_params(const ModelConfig& config, uint64_t seed);

// log_std squashing bounds: identity in the interior, smoothly clamped to
// [-6, 4] so sigma cannot collapse or explode early in adversarial training.
constexpr double kLogStdLo = -6.0;
constexpr double kLogStdHi = 4.0;
constexpr double kLogStdSharpness = 4.0;

double smooth_clamp_log_std(double t);

/// One-hot encode group ids as a B x K matrix.
Tensor one_hot(const std::vector<int>& u, int group_count);

// ---- Tape-building batched forwards (training path) ----

struct EncoderNodes {
    int w1, b1, w_mean, b_mean, w_lstd, b_lstd;
};
struct DecoderNodes {
    int w1, b1, w2, b2;
};
struct AdversaryNodes {
    int w1, b1, w2, b2;
};

EncoderNodes put_on_tape(Tape& t, const EncoderParams& p);
DecoderNodes put_on_tape(Tape& t, const DecoderParams& p);
AdversaryNodes put_on_tape(Tape& t, const AdversaryParams& p);

struct PosteriorNodes {
    int mean;     // B x z
    int log_std;  // B x z (squashed)
};

/// x: node of B x x_dim (constant leaf), u_onehot: node of B x K.
PosteriorNodes encode_on_tape(Tape& t, const EncoderNodes& enc, int x, int u_onehot);

/// z = mean + exp(log_std) .* noise
int reparameterize_on_tape(Tape& t, const PosteriorNodes& post, int noise);

/// Decoder output pre-activations, B x x_dim (logits for Bernoulli features,
/// means for Gaussian features).
int decode_on_tape(Tape& t, const DecoderNodes& dec, int z, int u_onehot);

/// Group logits, B x K. y column (B x 1 of 0/1) must be given iff the
/// adversary is label-conditioned.
int adversary_logits_on_tape(Tape& t, const AdversaryNodes& adv, int z, int y_col, bool label_conditioned);

// ---- Plain forwards (evaluation path, no gradients) ----

DiagGaussian encode(const EncoderParams& enc, const ModelConfig& cfg,
                    const double* x_row, int u);

/// Posterior parameters for a whole matrix of rows at once.
void encode_batch(const EncoderParams& enc, const ModelConfig& cfg,
                  const Tensor& x, const std::vector<int>& u,
                  Tensor& means_out, Tensor& log_stds_out);

Tensor decode(const DecoderParams& dec, const ModelConfig& cfg,
              const Tensor& z_row, int u);

Tensor adversary_logits(const AdversaryParams& adv, const ModelConfig& cfg,
                        const Tensor& z_row, std::optional<int> y);

}  // namespace fairrep
