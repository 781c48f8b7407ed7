#pragma once

#include "latentcast/evalkit/report.hpp"
#include "latentcast/harness/config.hpp"

#include <filesystem>
#include <map>

namespace latentcast::harness {

namespace fs = std::filesystem;

// Each stage reads its inputs from disk and writes one output directory. They
// back both the pipeline and the individual CLI subcommands.

/// Writes `worlds` x `branches` clips of one split.
void generate_dataset(const synthworld::WorldConfig& world, synthworld::Split split, std::uint64_t seed, int worlds,
                      int branches, const fs::path& out);

/// Pretrains trainable variants on a train-split dataset; other variants are
/// saved as initialized. Returns the parameter checksum of the frozen encoder.
std::string train_encoder(const backbones::EncoderSpec& spec, const fs::path& data, const fs::path& out);

/// Trains one readout on a readout-train dataset encoded by a frozen encoder.
std::string train_readout(const readouts::ReadoutSpec& spec, const fs::path& encoder, const fs::path& data,
                          const fs::path& out);

/// Per-channel statistics of the encoder's latents over a train dataset.
void compute_norm(const fs::path& encoder, const fs::path& data, const fs::path& out);

/// Writes model/, norm/ and source.json (the encoder path) to `out`. Token
/// geometry in `spec.denoiser` is taken from the encoder. When `norm` is empty
/// the statistics are computed from `data`.
std::string train_forecaster(forecaster::ForecasterSpec spec, const fs::path& encoder, const fs::path& data,
                             const fs::path& out, const fs::path& norm = {});

/// Forecasts for every branch-0 clip of an eval dataset, one
/// example_NNNNN.lten per example holding [n, 12, N, D] normalized latents
/// (n = 1 for regression), plus manifest.json.
void sample_forecasts(const fs::path& forecaster, const fs::path& data, int n, std::uint64_t seed, const fs::path& out);

/// Readout checkpoint directory per task.
using ReadoutPaths = std::map<Task, fs::path>;

/// Mean task metric of each readout on encoded branch-0 eval clips, over the
/// 12 forecast frames. Writes perception.json.
std::map<Task, std::optional<double>> evaluate_perception(const fs::path& encoder, const ReadoutPaths& readouts,
                                                          const fs::path& data, const fs::path& out);

/// Decodes the forecasts with each readout and scores them against the eval
/// clips. Writes report.json (an evalkit::MetricReport).
evalkit::MetricReport evaluate_forecasts(const fs::path& forecaster, const fs::path& samples,
                                         const ReadoutPaths& readouts, const fs::path& data,
                                         const fs::path& perception, const fs::path& out);

/// Clips of an eval dataset with branch seed 0, in dataset order.
std::vector<const synthworld::Clip*> realized_clips(const synthworld::Dataset& eval);

}  // namespace latentcast::harness
