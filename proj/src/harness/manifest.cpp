#include "latentcast/harness/manifest.hpp"

#include "latentcast/numkit/io.hpp"

#include <algorithm>

namespace latentcast::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::map<std::string, std::string> file_digests(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    if (fs::is_regular_file(dir)) {
        out[dir.filename().generic_string()] = numkit::file_sha256(dir);
        return out;
    }
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), dir).generic_string();
        if (rel == kStageMarker) continue;
        out[rel] = numkit::file_sha256(entry.path());
    }
    return out;
}

std::string dir_digest(const fs::path& dir) { return numkit::sha256_hex(json(file_digests(dir)).dump()); }

const StageRecord* RunManifest::find(const std::string& name, const std::string& key) const {
    for (const auto& s : stages) {
        if (s.name == name && s.key == key) return &s;
    }
    return nullptr;
}

void to_json(json& j, const StageRecord& r) {
    j = {{"name", r.name},       {"key", r.key},         {"dir", r.dir},
         {"resumed", r.resumed}, {"seconds", r.seconds}, {"inputs", r.inputs},
         {"outputs", r.outputs}, {"checksums", r.checksums}, {"reads", r.reads}};
}

void from_json(const json& j, StageRecord& r) {
    r.name = j.at("name").get<std::string>();
    r.key = j.at("key").get<std::string>();
    r.dir = j.at("dir").get<std::string>();
    r.resumed = j.value("resumed", false);
    r.seconds = j.value("seconds", 0.0);
    r.inputs = j.value("inputs", std::map<std::string, std::string>{});
    r.outputs = j.value("outputs", std::map<std::string, std::string>{});
    r.checksums = j.value("checksums", std::map<std::string, std::string>{});
    r.reads = j.value("reads", std::vector<std::string>{});
}

void RunManifest::save(const fs::path& path) const {
    const json j = {{"config", config},
                    {"stages", stages},
                    {"failed_stage", failed_stage},
                    {"error", error},
                    {"frozen_checks", frozen_checks}};
    numkit::write_text_file(path, j.dump(2) + "\n");
}

RunManifest RunManifest::load(const fs::path& path) {
    const json j = json::parse(numkit::read_text_file(path));
    RunManifest m;
    m.config = j.at("config");
    m.stages = j.at("stages").get<std::vector<StageRecord>>();
    m.failed_stage = j.value("failed_stage", "");
    m.error = j.value("error", "");
    m.frozen_checks = j.value("frozen_checks", json::object());
    return m;
}

}  // namespace latentcast::harness
