#pragma once

#include "latentcast/backbones/encoder.hpp"
#include "latentcast/forecaster/denoiser.hpp"
#include "latentcast/forecaster/schedule.hpp"

#include <filesystem>

namespace latentcast::forecaster {

enum class Mode { diffusion, regression };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);

struct ForecasterSpec {
    Mode mode = Mode::diffusion;
    DenoiserSpec denoiser;
    int schedule_steps = 200;
    int train_steps = 2000;
    int batch = 16;
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const ForecasterSpec& spec);
void from_json(const nlohmann::json& j, ForecasterSpec& spec);

struct ForecastSampleSet {
    Tensor samples;  // [n, 12, N, D], normalized latents
    std::uint64_t seed = 0;
    int sampler_steps = 0;
};

class Forecaster {
public:
    explicit Forecaster(ForecasterSpec spec);

    Forecaster(Forecaster&&) = default;
    Forecaster& operator=(Forecaster&&) = default;

    const ForecasterSpec& spec() const { return spec_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const Denoiser& denoiser() const { return net_; }
    Denoiser& denoiser() { return net_; }
    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }
    std::string checksum() const;

    void save(const std::filesystem::path& dir) const;
    static Forecaster load(const std::filesystem::path& dir);

private:
    ForecasterSpec spec_;
    NoiseSchedule schedule_;
    Denoiser net_;
    bool trained_ = false;
};

struct TrainReport {
    std::vector<double> losses;
};

/// Splits each normalized [16, N, D] trajectory at frame 4 and fits the
/// eps-prediction objective on the 12 future frames. Throws
/// std::invalid_argument for unnormalized latents or a regression-mode model.
TrainReport train_diffusion(Forecaster& model, std::span<const backbones::LatentTrajectory> train);

/// Mean eps-prediction error over `draws` (example, step, noise) triples drawn
/// from `seed` with steps uniform in [s_min, s_max] (0 means S); identical
/// draws for any model with the same schedule.
double diffusion_loss(const Forecaster& model, std::span<const backbones::LatentTrajectory> data, int draws,
                      std::uint64_t seed, int s_min = 1, int s_max = 0);

/// Same network, timestep fixed at 0 and the future slots zeroed, fit with L2
/// to the true future latents.
TrainReport train_regression(Forecaster& model, std::span<const backbones::LatentTrajectory> train);

/// Ancestral sampling from s = S down to 1 with the posterior variance.
/// context: [4, N, D] normalized. Sample i draws its noise from
/// mix_seed(seed, i), so results do not depend on thread count.
ForecastSampleSet sample(const Forecaster& model, const Tensor& context, int n, std::uint64_t seed);

/// sample() for many examples; example e uses seed mix_seed(seed, e).
std::vector<ForecastSampleSet> sample_many(const Forecaster& model, std::span<const Tensor> contexts, int n,
                                           std::uint64_t seed);

/// One deterministic [12, N, D] trajectory. There is no sample count: the
/// regression model emits exactly one output.
Tensor regress(const Forecaster& model, const Tensor& context);

/// Frames [begin, end) of a [T, N, D] trajectory.
Tensor frames_of(const Tensor& trajectory, int begin, int end);

}  // namespace latentcast::forecaster
