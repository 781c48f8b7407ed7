#pragma once

#include "latentcast/harness/config.hpp"
#include "latentcast/harness/manifest.hpp"

#include <filesystem>
#include <functional>

namespace latentcast::harness {

class StageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// generate -> train-encoders -> train-readouts -> perception -> norm-stats ->
/// train-forecasters -> sample -> evaluate -> report. Stage outputs live
/// under content-addressed directories, so a rerun skips every stage whose
/// output is intact and ablations share upstream artifacts.
class Pipeline {
public:
    explicit Pipeline(RunConfig config);

    const RunConfig& config() const { return config_; }
    const RunManifest& manifest() const { return manifest_; }

    /// Runs every stage. On failure the manifest records the failed stage and
    /// the error is rethrown as StageError.
    RunManifest run();

    // Individual stages with their dependencies; each returns its output directory.
    std::filesystem::path generate();
    std::filesystem::path encoder(Variant v);
    std::filesystem::path readout(Variant v, Task t);
    std::filesystem::path perception(Variant v);
    std::filesystem::path norm(Variant v);
    std::filesystem::path forecaster(Variant v, forecaster::Mode mode);
    std::filesystem::path samples(Variant v, forecaster::Mode mode);
    std::filesystem::path evaluation(Variant v, forecaster::Mode mode);
    std::filesystem::path report();

    /// Recomputes digests and parameter checksums of every encoder and readout
    /// and compares them with the values recorded when they were produced.
    bool check_frozen();

    std::filesystem::path manifest_path() const { return config_.out / "manifest.json"; }
    std::filesystem::path eval_split_dir();

private:
    using Body = std::function<std::map<std::string, std::string>(const std::filesystem::path& tmp)>;
    std::filesystem::path stage(const std::string& name, const nlohmann::json& key_material,
                                const std::string& dir_name, const std::vector<std::filesystem::path>& inputs,
                                const Body& body);
    std::string relative(const std::filesystem::path& p) const;
    void save_manifest() const;

    RunConfig config_;
    RunManifest manifest_;
    std::map<std::string, std::filesystem::path> done_;
};

}  // namespace latentcast::harness
