#pragma once

#include <vector>

#include "fairrep/tensor.hpp"

namespace fairrep {

/// Adam with bias correction. beta1 = 0.5 by default, matching the
/// adversarial-training convention used throughout this project.
struct AdamState {
    std::vector<Tensor> m;  // first moments, one per parameter tensor
    std::vector<Tensor> v;  // second moments
    long step = 0;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(const std::vector<Tensor*>& params,
                                double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8);
};

/// One Adam update in place. params/grads/state must agree in count and shape.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, double lr);

/// Step-decay schedule: base_lr * decay_factor^floor(iter / decay_every).
struct LrSchedule {
    double base_lr = 1e-3;
    double decay_factor = 0.98;
    long decay_every = 1000;

    double at(long iter) const;
};

}  // namespace fairrep
