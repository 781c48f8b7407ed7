#pragma once

#include "latentcast/numkit/tensor.hpp"

#include <json.hpp>

#include <vector>

namespace latentcast::forecaster {

using numkit::Tensor;

/// Linear beta schedule rescaled from the 1000-step reference to `steps`.
/// Vectors are indexed by s - 1 for s in [1, steps].
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    static NoiseSchedule linear(int steps = 200);

    double beta_at(int s) const { return beta[index(s)]; }
    double alpha_at(int s) const { return alpha[index(s)]; }
    double alpha_bar_at(int s) const { return alpha_bar[index(s)]; }
    /// Variance of the reverse-step posterior q(x_{s-1} | x_s, x_0); zero at s = 1.
    double posterior_variance(int s) const;
    double signal_to_noise(int s) const { return alpha_bar_at(s) / (1.0 - alpha_bar_at(s)); }

    /// Throws std::out_of_range for s outside [1, steps].
    std::size_t index(int s) const;
};

void to_json(nlohmann::json& j, const NoiseSchedule& schedule);
void from_json(const nlohmann::json& j, NoiseSchedule& schedule);

/// x_s = sqrt(abar_s) x0 + sqrt(1 - abar_s) eps.
Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, int s, const Tensor& eps);

}  // namespace latentcast::forecaster
