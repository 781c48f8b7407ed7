#include "latentcast/numkit/optim.hpp"

#include <cmath>
#include <numbers>

namespace latentcast::numkit {

template <typename S>
void adam_step(BasicOptimizerState<S>& state, BasicParamStore<S>& params) {
    const auto& cfg = state.config;
    double sq_norm = 0.0;
    for (auto& [name, p] : params) {
        if (p.grad.shape() != p.value.shape()) p.zero_grad();
        if (!p.grad.all_finite()) throw TrainingDiverged("non-finite gradient in parameter " + name);
        sq_norm += static_cast<double>(p.grad.array().square().sum());
    }
    double clip = 1.0;
    if (cfg.clip_norm > 0.0 && std::sqrt(sq_norm) > cfg.clip_norm) clip = cfg.clip_norm / std::sqrt(sq_norm);

    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const auto b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
    const auto step_size = static_cast<S>(cfg.learning_rate / bc1);
    const auto root_bc2 = static_cast<S>(std::sqrt(bc2));
    const auto eps = static_cast<S>(cfg.epsilon);
    for (auto& [name, p] : params) {
        auto& m = state.first_moment[name];
        auto& v = state.second_moment[name];
        if (m.shape() != p.value.shape()) m = BasicTensor<S>(p.value.shape());
        if (v.shape() != p.value.shape()) v = BasicTensor<S>(p.value.shape());
        const auto g = p.grad.array() * static_cast<S>(clip);
        m.array() = b1 * m.array() + (S(1) - b1) * g;
        v.array() = b2 * v.array() + (S(1) - b2) * g.square();
        p.value.array() -= step_size * m.array() / (v.array().sqrt() / root_bc2 + eps);
    }
}

double warmup_cosine(double base, std::int64_t step, std::int64_t total, std::int64_t warmup, double floor) {
    if (warmup > 0 && step < warmup) return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const double span = static_cast<double>(std::max<std::int64_t>(1, total - warmup));
    const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
    return base * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

template void adam_step<float>(BasicOptimizerState<float>&, BasicParamStore<float>&);
template void adam_step<double>(BasicOptimizerState<double>&, BasicParamStore<double>&);

}  // namespace latentcast::numkit
