#pragma once

#include "latentcast/numkit/nn.hpp"
#include "latentcast/synthworld/world.hpp"

#include <json.hpp>

#include <span>

namespace latentcast::forecaster {

using numkit::Graph;
using numkit::ParamStore;
using numkit::Tensor;
using numkit::Var;

inline constexpr int kContextFrames = synthworld::kContextFrames;
inline constexpr int kFutureFrames = synthworld::kFutureFrames;

struct DenoiserSpec {
    int token_dim = 64;
    int tokens_per_frame = 16;
    /// Token grid columns; rows follow from tokens_per_frame.
    int grid_width = 4;
    /// Square groups of latent tokens merged into one denoiser token.
    int latent_patch = 2;
    int width = 96;
    int depth = 4;
    int heads = 4;
    int time_dim = 64;
    /// Largest timestep the network accepts; step 0 is the regression input.
    int max_step = 200;
    /// Adds gain(s) * x_s to the prediction, per channel.
    bool input_skip = true;

    void validate() const;
    int grid_height() const { return tokens_per_frame / grid_width; }
    int groups_per_frame() const { return tokens_per_frame / (latent_patch * latent_patch); }
    int group_dim() const { return latent_patch * latent_patch * token_dim; }
    int sequence_length() const { return (kContextFrames + kFutureFrames) * groups_per_frame(); }
};

void to_json(nlohmann::json& j, const DenoiserSpec& spec);
void from_json(const nlohmann::json& j, DenoiserSpec& spec);

/// Transformer over the 16-frame token sequence: 4 clean context frames
/// followed by 12 future frames, every latent_patch x latent_patch block of
/// tokens merged into one position. Predicts one [12, N, D] tensor per
/// example from the future rows only. With input_skip, a learned per-step,
/// per-channel gain on the noisy input is added so the noise itself bypasses
/// the width bottleneck.
class Denoiser {
public:
    Denoiser() = default;
    /// initial_gain[s] seeds the skip gain for step s (zeros when empty).
    Denoiser(DenoiserSpec spec, numkit::Rng& rng, std::span<const double> initial_gain = {});

    Denoiser(Denoiser&&) = default;
    Denoiser& operator=(Denoiser&&) = default;

    const DenoiserSpec& spec() const { return spec_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    /// context: [B, 4, N, D]; future: [B, 12, N, D]; steps: B timestep values.
    /// Returns [B, 12, N, D].
    Var operator()(Graph& g, const Tensor& context, const Tensor& future, std::span<const int> steps) const;

private:
    DenoiserSpec spec_;
    ParamStore params_;
    numkit::Linear<float> input_;
    numkit::Parameter* spatial_ = nullptr;
    numkit::Parameter* frame_ = nullptr;
    numkit::Linear<float> time_in_, time_out_;
    std::vector<numkit::SelfAttentionBlock<float>> blocks_;
    numkit::LayerNorm<float> final_norm_;
    numkit::Linear<float> output_;
    numkit::Parameter* skip_gain_ = nullptr;
    std::vector<std::int64_t> spatial_index_, frame_index_;
    std::vector<std::int64_t> group_order_;  // grouped slot -> token within a frame
    std::vector<std::int64_t> ungroup_;      // future output row (token order) -> grouped row
};

}  // namespace latentcast::forecaster
