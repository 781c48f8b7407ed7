#pragma once

#include "latentcast/numkit/nn.hpp"
#include "latentcast/synthworld/world.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace latentcast::backbones {

using numkit::Graph;
using numkit::ParamStore;
using numkit::Tensor;
using numkit::Var;

enum class Variant { random_frozen, pixel_identity, image_mae, video_mae };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct EncoderSpec {
    Variant variant = Variant::video_mae;
    int image_height = 64;
    int image_width = 64;
    int patch = 16;
    int dim = 64;
    int depth = 4;
    int heads = 4;
    double mask_ratio = 0.75;
    /// Frames per masked-reconstruction window; tubes span the window.
    int window = 4;
    int decoder_depth = 1;
    int pretrain_steps = 600;
    int batch = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
    int grid_height() const { return image_height / patch; }
    int grid_width() const { return image_width / patch; }
    int tokens() const { return grid_height() * grid_width(); }
    int patch_dim() const { return patch * patch * 3; }
    /// Latent channels: the pixel-identity variant keeps every patch value.
    int token_dim() const { return variant == Variant::pixel_identity ? patch_dim() : dim; }
    bool trainable() const { return variant == Variant::image_mae || variant == Variant::video_mae; }
};

void to_json(nlohmann::json& j, const EncoderSpec& spec);
void from_json(const nlohmann::json& j, EncoderSpec& spec);

struct LatentTrajectory {
    Tensor tokens;  // [T, N, D]
    bool normalized = false;
    std::string encoder;
};

/// [F, H, W, 3] -> [F, N, p*p*3]; tokens in raster order, patch values (dy, dx, channel).
Tensor patchify(const Tensor& frames, int patch);
/// Inverse of patchify for an [F, N, p*p*C] tensor with C channels.
Tensor unpatchify(const Tensor& patches, int patch, int height, int width, int channels);

/// A per-frame encoder. Each frame's tokens depend only on that frame and its
/// temporal index.
class Encoder {
public:
    explicit Encoder(EncoderSpec spec);

    Encoder(Encoder&&) = default;
    Encoder& operator=(Encoder&&) = default;

    const EncoderSpec& spec() const { return spec_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::string name() const { return std::string(to_string(spec_.variant)); }

    /// Frozen-contract fingerprint of every weight.
    std::string checksum() const;

    LatentTrajectory encode(const synthworld::Clip& clip) const;
    /// frames: [F, H, W, 3]; times: temporal index of each frame. Returns [F, N, D].
    Tensor encode_frames(const Tensor& frames, std::span<const int> times) const;

    /// Differentiable trunk for pretraining. patches: [F, n, P]; positions
    /// holds the F*n token indices of those patches, frame-major; times has F
    /// entries. Returns [F, n, D] before any output-side temporal embedding.
    Var trunk(Graph& g, const Tensor& patches, std::span<const std::int64_t> positions, std::span<const int> times) const;

    void save(const std::filesystem::path& dir) const;
    static Encoder load(const std::filesystem::path& dir);

private:
    EncoderSpec spec_;
    ParamStore params_;
    numkit::Parameter* projection_ = nullptr;  // pixel-identity only
    numkit::Linear<float> embed_;
    numkit::Parameter* spatial_ = nullptr;
    numkit::Parameter* temporal_ = nullptr;  // video-mae only
    std::vector<numkit::SelfAttentionBlock<float>> blocks_;
    numkit::LayerNorm<float> final_norm_;
    Tensor output_temporal_;  // fixed sinusoidal table for image-mae and random-frozen
};

}  // namespace latentcast::backbones
