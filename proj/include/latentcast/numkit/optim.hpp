#pragma once

#include "latentcast/numkit/nn.hpp"

#include <map>
#include <stdexcept>
#include <string>

namespace latentcast::numkit {

/// A gradient or loss went non-finite.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Global gradient-norm clip; <= 0 disables.
    double clip_norm = 0.0;
};

template <typename S>
struct BasicOptimizerState {
    AdamConfig config;
    std::int64_t step = 0;
    std::map<std::string, BasicTensor<S>> first_moment;
    std::map<std::string, BasicTensor<S>> second_moment;
};

using OptimizerState = BasicOptimizerState<float>;

/// Bias-corrected Adam update using each parameter's accumulated grad.
/// Throws TrainingDiverged if any gradient entry is NaN or infinite.
template <typename S>
void adam_step(BasicOptimizerState<S>& state, BasicParamStore<S>& params);

/// Learning rate at `step` for linear warmup followed by cosine decay to
/// `floor` * base.
double warmup_cosine(double base, std::int64_t step, std::int64_t total, std::int64_t warmup, double floor = 0.05);

}  // namespace latentcast::numkit
