#pragma once

#include "latentcast/synthworld/world.hpp"

#include <json.hpp>

#include <filesystem>
#include <string_view>

namespace latentcast::synthworld {

enum class Split { train, readout_train, eval };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct ClipSeeds {
    std::uint64_t world_seed = 0;
    std::uint64_t branch_seed = 0;

    friend bool operator==(const ClipSeeds&, const ClipSeeds&) = default;
};

struct Dataset {
    WorldConfig config;
    Split split = Split::train;
    std::vector<Clip> clips;

    std::vector<ClipSeeds> seeds() const;
};

void to_json(nlohmann::json& j, const WorldConfig& config);
void from_json(const nlohmann::json& j, WorldConfig& config);

/// World seeds for a split. Each split draws from its own substream of
/// base_seed, so worlds never repeat across splits. Every world contributes
/// `branches` clips with branch seeds 0..branches-1.
std::vector<ClipSeeds> split_seeds(Split split, std::uint64_t base_seed, int worlds, int branches = 1);

/// Generates clips in parallel; order follows `seeds`.
Dataset make_dataset(const WorldConfig& config, Split split, const std::vector<ClipSeeds>& seeds);

inline constexpr int kDatasetFormatVersion = 1;

/// Directory layout: manifest.json plus clip_NNNNN.<channel>.lten per clip
/// for channels rgb, depth, tracks, boxes.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Manifest only; cheap way to learn the split, config and seeds.
nlohmann::json read_dataset_manifest(const std::filesystem::path& dir);

/// Rebuilds every clip from the seeds stored in the manifest.
Dataset regenerate(const std::filesystem::path& dir);

}  // namespace latentcast::synthworld
