#include "latentcast/harness/pipeline.hpp"

#include "latentcast/harness/report.hpp"
#include "latentcast/harness/stages.hpp"
#include "latentcast/numkit/io.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <set>

namespace latentcast::harness {

namespace fs = std::filesystem;
using forecaster::Mode;
using nlohmann::json;

namespace {

// Stages that must never see the eval split.
const std::set<std::string> kTrainingStages{"train-encoder", "train-readout", "norm-stats", "train-forecaster"};

std::string key_of(const fs::path& dir) {
    const std::string name = dir.filename().string();
    return name.substr(name.rfind('-') + 1);
}

bool starts_with(const fs::path& path, const fs::path& prefix) {
    const auto p = path.lexically_normal().generic_string(), q = prefix.lexically_normal().generic_string();
    return p.size() >= q.size() && p.compare(0, q.size(), q) == 0 && (p.size() == q.size() || p[q.size()] == '/');
}

}  // namespace

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
    config_.validate();
    config_.out = fs::absolute(config_.out).lexically_normal();
    manifest_.config = config_;
    manifest_.config["out"] = config_.out.string();
}

std::string Pipeline::relative(const fs::path& p) const {
    const fs::path abs = fs::absolute(p).lexically_normal();
    if (starts_with(abs, config_.out)) return abs.lexically_relative(config_.out).generic_string();
    return abs.generic_string();
}

void Pipeline::save_manifest() const {
    fs::create_directories(config_.out);
    manifest_.save(manifest_path());
}

fs::path Pipeline::stage(const std::string& name, const json& key_material, const std::string& dir_name,
                         const std::vector<fs::path>& inputs, const Body& body) {
    const std::string key = content_key({{"stage", name}, {"material", key_material}});
    const fs::path final_dir = config_.out / fmt::format("{}-{}", dir_name, key);
    if (auto it = done_.find(final_dir.string()); it != done_.end()) return it->second;

    StageRecord record;
    record.name = name;
    record.key = key;
    record.dir = relative(final_dir);
    for (const auto& in : inputs) record.inputs[relative(in)] = dir_digest(in);

    const fs::path marker = final_dir / kStageMarker;
    if (fs::exists(marker)) {
        const json m = json::parse(numkit::read_text_file(marker));
        const auto recorded = m.at("outputs").get<std::map<std::string, std::string>>();
        if (recorded == file_digests(final_dir)) {
            record.resumed = true;
            record.outputs = recorded;
            record.checksums = m.value("checksums", std::map<std::string, std::string>{});
            record.reads = m.value("reads", std::vector<std::string>{});
            manifest_.stages.push_back(record);
            save_manifest();
            done_[final_dir.string()] = final_dir;
            spdlog::info("stage {} {}: resumed", name, record.dir);
            return final_dir;
        }
        spdlog::warn("stage {} {}: outputs changed since completion, rerunning", name, record.dir);
    }

    const fs::path tmp = final_dir.string() + ".tmp";
    fs::remove_all(final_dir);
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    spdlog::info("stage {} {}: running", name, record.dir);
    const auto start = std::chrono::steady_clock::now();
    try {
        numkit::ReadAudit audit;
        record.checksums = body(tmp);
        for (const auto& p : audit.paths()) {
            const fs::path abs = fs::absolute(p).lexically_normal();
            record.reads.push_back(starts_with(abs, tmp) ? relative(final_dir / abs.lexically_relative(tmp))
                                                         : relative(abs));
        }
        std::sort(record.reads.begin(), record.reads.end());
        record.reads.erase(std::unique(record.reads.begin(), record.reads.end()), record.reads.end());
        if (kTrainingStages.contains(name)) {
            const std::string eval = relative(eval_split_dir());
            for (const auto& r : record.reads) {
                if (starts_with(r, eval)) throw StageError(name + " opened an eval-split file: " + r);
            }
        }
        fs::rename(tmp, final_dir);
    } catch (const std::exception& e) {
        manifest_.failed_stage = name + " " + record.dir;
        manifest_.error = e.what();
        save_manifest();
        fs::remove_all(tmp);
        throw StageError("stage " + name + " failed: " + e.what());
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record.outputs = file_digests(final_dir);
    const json m = {{"stage", name},
                    {"key", key},
                    {"outputs", record.outputs},
                    {"checksums", record.checksums},
                    {"reads", record.reads}};
    numkit::write_text_file(marker, m.dump(2) + "\n");
    manifest_.stages.push_back(record);
    save_manifest();
    done_[final_dir.string()] = final_dir;
    spdlog::info("stage {} {}: done in {:.1f} s", name, record.dir, record.seconds);
    return final_dir;
}

fs::path Pipeline::generate() {
    const auto& d = config_.data;
    return stage("generate", {{"world", config_.world}, {"data", d}}, "data/world", {}, [&](const fs::path& tmp) {
        using synthworld::Split;
        generate_dataset(config_.world, Split::train, d.seed, d.train_worlds, 1, tmp / "train");
        generate_dataset(config_.world, Split::readout_train, d.seed, d.readout_worlds, 1, tmp / "readout-train");
        generate_dataset(config_.world, Split::eval, d.seed, d.eval_worlds, d.eval_branches, tmp / "eval");
        return std::map<std::string, std::string>{};
    });
}

fs::path Pipeline::eval_split_dir() { return generate() / "eval"; }

fs::path Pipeline::encoder(Variant v) {
    const auto spec = encoder_spec(config_, v);
    const fs::path data = generate() / "train";
    json material = {{"spec", spec}};
    std::vector<fs::path> inputs;
    if (spec.trainable()) {
        material["data"] = key_of(data.parent_path());
        inputs.push_back(data);
    }
    return stage("train-encoder", material, "encoders/" + std::string(backbones::to_string(v)), inputs,
                 [&](const fs::path& tmp) {
                     return std::map<std::string, std::string>{{"encoder", train_encoder(spec, data, tmp)}};
                 });
}

fs::path Pipeline::readout(Variant v, Task t) {
    const auto spec = readout_spec(config_, v, t);
    const fs::path enc = encoder(v), data = generate() / "readout-train";
    const json material = {{"spec", spec}, {"encoder", key_of(enc)}, {"data", key_of(data.parent_path())}};
    return stage("train-readout", material,
                 fmt::format("readouts/{}-{}", backbones::to_string(v), readouts::to_string(t)), {enc, data},
                 [&](const fs::path& tmp) {
                     return std::map<std::string, std::string>{{"readout", train_readout(spec, enc, data, tmp)}};
                 });
}

fs::path Pipeline::perception(Variant v) {
    ReadoutPaths heads;
    json material = json::object();
    std::vector<fs::path> inputs;
    for (auto t : readouts::kAllTasks) {
        heads[t] = readout(v, t);
        material[std::string(readouts::to_string(t))] = key_of(heads[t]);
        inputs.push_back(heads[t]);
    }
    const fs::path enc = encoder(v), data = eval_split_dir();
    material["encoder"] = key_of(enc);
    material["data"] = key_of(data.parent_path());
    inputs.push_back(enc);
    inputs.push_back(data);
    return stage("perception", material, "perception/" + std::string(backbones::to_string(v)), inputs,
                 [&](const fs::path& tmp) {
                     evaluate_perception(enc, heads, data, tmp);
                     return std::map<std::string, std::string>{};
                 });
}

fs::path Pipeline::norm(Variant v) {
    const fs::path enc = encoder(v), data = generate() / "train";
    return stage("norm-stats", {{"encoder", key_of(enc)}, {"data", key_of(data.parent_path())}},
                 "norm/" + std::string(backbones::to_string(v)), {enc, data}, [&](const fs::path& tmp) {
                     compute_norm(enc, data, tmp);
                     return std::map<std::string, std::string>{};
                 });
}

fs::path Pipeline::forecaster(Variant v, Mode mode) {
    const auto spec = forecaster_spec(config_, encoder_spec(config_, v), mode);
    const fs::path enc = encoder(v), stats = norm(v), data = generate() / "train";
    const json material = {{"spec", spec}, {"encoder", key_of(enc)}, {"norm", key_of(stats)}, {"data", key_of(data.parent_path())}};
    return stage("train-forecaster", material,
                 fmt::format("forecasters/{}-{}", backbones::to_string(v), forecaster::to_string(mode)),
                 {enc, stats, data}, [&](const fs::path& tmp) {
                     return std::map<std::string, std::string>{
                         {"forecaster", train_forecaster(spec, enc, data, tmp, stats)}};
                 });
}

fs::path Pipeline::samples(Variant v, Mode mode) {
    const fs::path model = forecaster(v, mode), data = eval_split_dir();
    const std::uint64_t seed = numkit::mix_seed(config_.sample_seed, static_cast<std::uint64_t>(v));
    const json material = {{"forecaster", key_of(model)}, {"n", config_.samples}, {"seed", seed}, {"data", key_of(data.parent_path())}};
    return stage("sample", material, fmt::format("samples/{}-{}", backbones::to_string(v), forecaster::to_string(mode)),
                 {model, data}, [&](const fs::path& tmp) {
                     sample_forecasts(model, data, config_.samples, seed, tmp);
                     return std::map<std::string, std::string>{};
                 });
}

fs::path Pipeline::evaluation(Variant v, Mode mode) {
    const fs::path model = forecaster(v, mode), sampled = samples(v, mode), seen = perception(v), data = eval_split_dir();
    ReadoutPaths heads;
    json material = {{"samples", key_of(sampled)}, {"perception", key_of(seen)}};
    std::vector<fs::path> inputs{model, sampled, seen, data};
    for (auto t : readouts::kAllTasks) {
        heads[t] = readout(v, t);
        material[std::string(readouts::to_string(t))] = key_of(heads[t]);
        inputs.push_back(heads[t]);
    }
    return stage("evaluate", material, fmt::format("eval/{}-{}", backbones::to_string(v), forecaster::to_string(mode)),
                 inputs, [&](const fs::path& tmp) {
                     evaluate_forecasts(model, sampled, heads, data, seen, tmp);
                     return std::map<std::string, std::string>{};
                 });
}

fs::path Pipeline::report() {
    std::vector<fs::path> evals;
    json material = json::array();
    for (auto v : config_.encoders) {
        evals.push_back(evaluation(v, Mode::diffusion));
        material.push_back(key_of(evals.back()));
    }
    for (auto v : config_.regression) {
        evals.push_back(evaluation(v, Mode::regression));
        material.push_back(key_of(evals.back()));
    }
    return stage("report", material, "report/report", evals, [&](const fs::path& tmp) {
        std::vector<evalkit::MetricReport> reports;
        for (const auto& e : evals) {
            reports.push_back(json::parse(numkit::read_text_file(e / "report.json")).get<evalkit::MetricReport>());
        }
        write_report(reports, tmp);
        return std::map<std::string, std::string>{};
    });
}

bool Pipeline::check_frozen() {
    bool ok = true;
    manifest_.frozen_checks = json::object();
    std::set<std::string> seen;
    for (const auto& s : manifest_.stages) {
        if ((s.name != "train-encoder" && s.name != "train-readout") || !seen.insert(s.dir).second) continue;
        const fs::path dir = config_.out / s.dir;
        const auto digests = file_digests(dir);
        std::string recorded_checksum, current_checksum;
        if (s.name == "train-encoder") {
            recorded_checksum = s.checksums.at("encoder");
            current_checksum = backbones::Encoder::load(dir).checksum();
        } else {
            recorded_checksum = s.checksums.at("readout");
            current_checksum = readouts::ReadoutHead::load(dir).checksum();
        }
        const bool same = digests == s.outputs && recorded_checksum == current_checksum;
        ok = ok && same;
        manifest_.frozen_checks[s.dir] = {{"recorded_checksum", recorded_checksum},
                                          {"current_checksum", current_checksum},
                                          {"files_unchanged", digests == s.outputs},
                                          {"ok", same}};
    }
    save_manifest();
    return ok;
}

RunManifest Pipeline::run() {
    manifest_.stages.clear();
    manifest_.failed_stage.clear();
    manifest_.error.clear();
    done_.clear();
    generate();
    for (auto v : config_.encoders) encoder(v);
    for (auto v : config_.encoders) {
        for (auto t : readouts::kAllTasks) readout(v, t);
    }
    for (auto v : config_.encoders) perception(v);
    for (auto v : config_.encoders) norm(v);
    for (auto v : config_.encoders) forecaster(v, Mode::diffusion);
    for (auto v : config_.regression) forecaster(v, Mode::regression);
    for (auto v : config_.encoders) samples(v, Mode::diffusion);
    for (auto v : config_.regression) samples(v, Mode::regression);
    for (auto v : config_.encoders) evaluation(v, Mode::diffusion);
    for (auto v : config_.regression) evaluation(v, Mode::regression);
    report();
    if (!check_frozen()) spdlog::error("frozen artifact check failed; see manifest frozen_checks");
    return manifest_;
}

}  // namespace latentcast::harness
