#pragma once

#include "latentcast/backbones/encoder.hpp"
#include "latentcast/synthworld/dataset.hpp"

#include <filesystem>
#include <string_view>

namespace latentcast::readouts {

using numkit::Graph;
using numkit::ParamStore;
using numkit::Tensor;
using numkit::Var;

enum class Task { pixels, depth, points, boxes };

inline constexpr std::array<Task, 4> kAllTasks{Task::pixels, Task::depth, Task::points, Task::boxes};

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

/// Uncertainty target: position error above this many pixels.
inline constexpr double kUncertaintyThresholdPx = 4.0;
inline constexpr double kVisibilityWeight = 1.0;
inline constexpr double kUncertaintyWeight = 0.5;
inline constexpr double kHuberDeltaPx = 1.0;

struct ReadoutSpec {
    Task task = Task::pixels;
    int width = 64;
    int heads = 4;
    int steps = 800;
    int batch = 8;
    /// Frames per clip drawn for each dense-task step.
    int frames_per_clip = 4;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const ReadoutSpec& spec);
void from_json(const nlohmann::json& j, ReadoutSpec& spec);

/// Decoded task output for one clip.
///   pixels: [T, H, W, 3] in [0, 1]
///   depth:  [T, H, W], positive
///   points: [Q, T, 4] = x, y, visibility logit, uncertainty logit (pixels)
///   boxes:  [K, T, 4] = x_min, y_min, x_max, y_max (pixels)
struct TaskOutput {
    Task task = Task::pixels;
    Tensor values;
};

/// Frame-1 conditioning: [Q, 2] track positions for points, [K, 4] boxes for
/// boxes, empty otherwise.
Tensor task_queries(const synthworld::Clip& clip, Task task);

/// Ground truth in the TaskOutput layout; points carry the visibility flag in
/// column 2 and boxes the present flag in column 4.
Tensor task_target(const synthworld::Clip& clip, Task task);

/// Geometry the head needs from the encoder and the world.
struct ReadoutGeometry {
    int token_dim = 64;
    int patch = 16;
    int height = 64;
    int width = 64;
    double depth_scale = 10.0;

    int tokens() const { return (height / patch) * (width / patch); }
};

struct ReadoutReport {
    std::vector<double> losses;
};

class ReadoutHead;

class ReadoutHead {
public:
    ReadoutHead(ReadoutSpec spec, ReadoutGeometry geometry);

    ReadoutHead(ReadoutHead&&) = default;
    ReadoutHead& operator=(ReadoutHead&&) = default;

    const ReadoutSpec& spec() const { return spec_; }
    const ReadoutGeometry& geometry() const { return geometry_; }
    Task task() const { return spec_.task; }
    bool trained() const { return trained_; }
    const ParamStore& params() const { return params_; }
    std::string checksum() const;

    /// latents: [T, N, D] raw (unnormalized) encoder tokens for frames 1..T;
    /// queries from task_queries(). Works the same on encoded and forecast
    /// latents. Throws std::logic_error if the head is untrained.
    TaskOutput decode(const Tensor& latents, const Tensor& queries) const;

    void save(const std::filesystem::path& dir) const;
    static ReadoutHead load(const std::filesystem::path& dir);

private:
    friend void fit_linear_skip(ReadoutHead&, std::span<const Tensor>, std::span<const Tensor>);
    friend ReadoutReport train_readout(ReadoutHead&, const synthworld::Dataset&, std::span<const Tensor>);

    struct Batch;
    Tensor standardize(const Tensor& tokens) const;
    Var context(Graph& g, const Tensor& standardized) const;
    /// Dense tasks: [F, N, patch values]. Points and boxes: [B*F, R, 4] raw head outputs.
    Var forward(Graph& g, const Batch& batch) const;
    /// Points: [B*F, R, 2] positions. Boxes: four [B*F, R, 1] corner coordinates.
    std::vector<Var> geometry(Var raw, const Batch& batch) const;
    Var loss(Graph& g, const Batch& batch) const;

    ReadoutSpec spec_;
    ReadoutGeometry geometry_;
    ParamStore params_;
    bool trained_ = false;

    numkit::Parameter* input_mean_ = nullptr;
    numkit::Parameter* input_std_ = nullptr;
    numkit::Linear<float> input_;
    numkit::Parameter* context_position_ = nullptr;
    // dense tasks
    numkit::Parameter* query_position_ = nullptr;
    numkit::CrossAttentionBlock<float> dense_block_;
    numkit::Linear<float> patch_out_, patch_skip_;
    // points and boxes
    numkit::Linear<float> query_embed_;
    numkit::Parameter* time_embedding_ = nullptr;
    numkit::CrossAttentionBlock<float> anchor_block_, frame_block_;
    numkit::Linear<float> track_out_;
};

/// Trains a head on encoded clips of the readout-train split, then freezes it.
/// latents[i] are the raw encoder tokens of data.clips[i]. Throws
/// std::logic_error if the head was already trained and std::invalid_argument
/// if the dataset is not the readout-train split or latents are misaligned.
ReadoutReport train_readout(ReadoutHead& head, const synthworld::Dataset& data, std::span<const Tensor> latents);

}  // namespace latentcast::readouts
