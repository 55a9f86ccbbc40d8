#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fairrep/data.hpp"
#include "fairrep/model.hpp"
#include "fairrep/objective.hpp"
#include "fairrep/optim.hpp"

namespace fairrep {

enum class TrainMode { MIFR, LMIFR };

struct TrainConfig {
    TrainMode mode = TrainMode::LMIFR;
    int epochs = 2000;
    int batch_size = 128;
    int adversary_steps = 10;  // D
    LrSchedule lr{1e-3, 0.98, 1000};
    double eta_lambda = 0.01;
    uint64_t seed = 0;
    ConstraintSpec constraints;
    Multipliers initial_lambda;       // MIFR: the fixed multipliers for the whole run
    ModelConfig model;
    double ema_alpha = 0.95;          // smoothing of the C_i fed to the dual ascent
    bool raw_constraint_ascent = false;
    int log_every = 50;
    // Feasibility construction: q(z|x,u) pinned to the prior (z is pure
    // noise), only the adversaries train.
    bool pin_encoder_to_prior = false;

    void validate(const TabularDataset& data) const;
    bool wants_eo_terms() const;
};

struct TrainState {
    ModelParams params;
    Multipliers lambda;
    AdamState adam_enc, adam_dec, adam_adv, adam_adv_y;
    long iteration = 0;
    BatchEstimates ema;
    bool ema_init = false;
};

struct MetricsRow {
    long iteration = 0;
    int epoch = 0;
    BatchEstimates est;
    Multipliers lambda;
    double lr = 0.0;
};

struct TrainResult {
    TrainState state;
    std::vector<MetricsRow> log;
};

long steps_per_epoch(int n, int batch_size);

/// Runs (or resumes) training for config.epochs total epochs. Per minibatch:
/// D adversary Adam steps on independently resampled batches, one
/// encoder/decoder step on the MIFR or L-MIFR loss, then (L-MIFR) one
/// multiplier ascent step. Deterministic given the seed, including across a
/// checkpoint/resume boundary. Any non-finite loss aborts with a diagnostic
/// checkpoint at `diagnostic_dump_path` (when given) and a thrown error.
TrainResult train(const TrainConfig& config, const TabularDataset& data,
                  std::ostream* metrics_out = nullptr,
                  const std::optional<TrainState>& resume_from = std::nullopt,
                  const std::string& diagnostic_dump_path = "");

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

std::string train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const std::string& text);

// Length-prefixed binary checkpoint: magic, version, config block, dataset
// schema fingerprint, tensor table. Round-trips bit-exactly.
void save_checkpoint(const TrainState& state, const TrainConfig& config, uint64_t schema_fingerprint,
                     const std::string& path);

struct LoadedCheckpoint {
    TrainState state;
    TrainConfig config;
    uint64_t schema_fingerprint = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace fairrep
