#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace latentcast::harness {

/// SHA-256 per regular file under `dir`, keyed by relative path with '/'
/// separators. The stage marker is excluded.
std::map<std::string, std::string> file_digests(const std::filesystem::path& dir);
/// One hash over file_digests(dir).
std::string dir_digest(const std::filesystem::path& dir);

inline constexpr const char* kStageMarker = "stage.json";

struct StageRecord {
    std::string name;
    std::string key;
    /// Output directory relative to the run root.
    std::string dir;
    bool resumed = false;
    double seconds = 0.0;
    /// Upstream artifact digests, keyed by run-relative path.
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    /// Parameter checksums of frozen artifacts this stage produced.
    std::map<std::string, std::string> checksums;
    /// Every file the stage opened, run-relative where possible.
    std::vector<std::string> reads;
};

struct RunManifest {
    nlohmann::json config;
    std::vector<StageRecord> stages;
    /// Stage that failed, with its error, if the run halted.
    std::string failed_stage;
    std::string error;
    /// Frozen artifact checks made after the last stage: path -> {recorded, current}.
    nlohmann::json frozen_checks = nlohmann::json::object();

    const StageRecord* find(const std::string& name, const std::string& key) const;
    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);
};

void to_json(nlohmann::json& j, const StageRecord& r);
void from_json(const nlohmann::json& j, StageRecord& r);

}  // namespace latentcast::harness
