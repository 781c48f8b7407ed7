#pragma once

#include "latentcast/backbones/encoder.hpp"
#include "latentcast/forecaster/diffusion.hpp"
#include "latentcast/readouts/readout.hpp"
#include "latentcast/synthworld/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace latentcast::harness {

using backbones::Variant;
using readouts::Task;

struct DataConfig {
    std::uint64_t seed = 1;
    /// Encoder pretraining, normalization statistics and forecaster training.
    int train_worlds = 512;
    int readout_worlds = 256;
    int eval_worlds = 32;
    /// Branches rendered per eval world. Branch 0 is the realized future of
    /// each example; all branches together form the ground-truth population.
    int eval_branches = 10;
};

/// Everything a run depends on. Per-variant and per-task seeds derive from
/// the stage seeds through numkit::mix_seed.
struct RunConfig {
    synthworld::WorldConfig world;
    DataConfig data;
    std::vector<Variant> encoders{Variant::random_frozen, Variant::pixel_identity, Variant::image_mae, Variant::video_mae};
    /// Shared encoder hyperparameters; the variant field is ignored.
    backbones::EncoderSpec encoder;
    /// Shared readout hyperparameters; the task field is ignored.
    readouts::ReadoutSpec readout;
    /// Shared forecaster hyperparameters; mode and token geometry are set per run.
    forecaster::ForecasterSpec forecaster;
    /// Encoders that also get a regression baseline.
    std::vector<Variant> regression{Variant::video_mae};
    int samples = 10;
    std::uint64_t sample_seed = 7;
    std::filesystem::path out = "runs/default";

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing fields keep their defaults; unknown top-level keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_config(const std::filesystem::path& path);

/// Per-variant specs as the pipeline trains them.
backbones::EncoderSpec encoder_spec(const RunConfig& c, Variant v);
readouts::ReadoutSpec readout_spec(const RunConfig& c, Variant v, Task t);
forecaster::ForecasterSpec forecaster_spec(const RunConfig& c, const backbones::EncoderSpec& encoder,
                                           forecaster::Mode mode);
readouts::ReadoutGeometry readout_geometry(const backbones::EncoderSpec& encoder, const synthworld::WorldConfig& world);

/// 16 hex characters of the SHA-256 of the canonical JSON dump.
std::string content_key(const nlohmann::json& j);

}  // namespace latentcast::harness
