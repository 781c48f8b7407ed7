#include "latentcast/forecaster/schedule.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace latentcast::forecaster {

NoiseSchedule NoiseSchedule::linear(int steps) {
    if (steps < 2) throw std::invalid_argument(fmt::format("noise schedule: need at least 2 steps, got {}", steps));
    const double scale = 1000.0 / steps;
    const double lo = 1e-4 * scale;
    const double hi = 0.02 * scale;
    if (hi >= 1.0) throw std::invalid_argument(fmt::format("noise schedule: {} steps push beta to {:g}", steps, hi));
    NoiseSchedule sch;
    sch.steps = steps;
    double running = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double b = lo + (hi - lo) * i / (steps - 1);
        sch.beta.push_back(b);
        sch.alpha.push_back(1.0 - b);
        running *= 1.0 - b;
        sch.alpha_bar.push_back(running);
    }
    return sch;
}

std::size_t NoiseSchedule::index(int s) const {
    if (s < 1 || s > steps) throw std::out_of_range(fmt::format("diffusion step {} outside [1, {}]", s, steps));
    return static_cast<std::size_t>(s - 1);
}

double NoiseSchedule::posterior_variance(int s) const {
    if (s == 1) {
        index(s);
        return 0.0;
    }
    return beta_at(s) * (1.0 - alpha_bar_at(s - 1)) / (1.0 - alpha_bar_at(s));
}

void to_json(nlohmann::json& j, const NoiseSchedule& schedule) {
    j = nlohmann::json{{"kind", "linear"}, {"steps", schedule.steps}};
}

void from_json(const nlohmann::json& j, NoiseSchedule& schedule) {
    if (j.value("kind", "linear") != "linear") throw std::invalid_argument("noise schedule: only 'linear' is supported");
    schedule = NoiseSchedule::linear(j.value("steps", 200));
}

Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, int s, const Tensor& eps) {
    if (x0.shape() != eps.shape()) throw numkit::ShapeError("q_sample", x0.shape(), eps.shape());
    const double ab = schedule.alpha_bar_at(s);
    Tensor out(x0.shape());
    out.array() = static_cast<float>(std::sqrt(ab)) * x0.array() + static_cast<float>(std::sqrt(1.0 - ab)) * eps.array();
    return out;
}

}  // namespace latentcast::forecaster
