#include "latentcast/harness/config.hpp"

#include "latentcast/numkit/io.hpp"

#include <algorithm>
#include <set>

namespace latentcast::harness {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + field + " " + what);
}

std::vector<Variant> parse_variants(const json& j) {
    std::vector<Variant> out;
    for (const auto& name : j) out.push_back(backbones::parse_variant(name.get<std::string>()));
    return out;
}

json variant_names(const std::vector<Variant>& vs) {
    json out = json::array();
    for (auto v : vs) out.push_back(std::string(backbones::to_string(v)));
    return out;
}

}  // namespace

void RunConfig::validate() const {
    world.validate();
    require(data.train_worlds >= 2, "data.train_worlds", "must be >= 2");
    require(data.readout_worlds >= 1, "data.readout_worlds", "must be >= 1");
    require(data.eval_worlds >= 2, "data.eval_worlds", "must be >= 2");
    require(data.eval_branches >= 2, "data.eval_branches", "must be >= 2 (the ground-truth population is split in halves)");
    require(!encoders.empty(), "encoders", "must not be empty");
    require(std::set(encoders.begin(), encoders.end()).size() == encoders.size(), "encoders", "has duplicates");
    for (auto v : regression) {
        require(std::find(encoders.begin(), encoders.end(), v) != encoders.end(), "regression",
                "names an encoder that is not in encoders");
    }
    require(samples >= 1, "samples", "must be >= 1");
    require(!out.empty(), "out", "must not be empty");
    encoder_spec(*this, encoders.front()).validate();
    readout_spec(*this, encoders.front(), Task::pixels).validate();
}

void to_json(json& j, const DataConfig& c) {
    j = {{"seed", c.seed},
         {"train_worlds", c.train_worlds},
         {"readout_worlds", c.readout_worlds},
         {"eval_worlds", c.eval_worlds},
         {"eval_branches", c.eval_branches}};
}

void from_json(const json& j, DataConfig& c) {
    const DataConfig d;
    c.seed = j.value("seed", d.seed);
    c.train_worlds = j.value("train_worlds", d.train_worlds);
    c.readout_worlds = j.value("readout_worlds", d.readout_worlds);
    c.eval_worlds = j.value("eval_worlds", d.eval_worlds);
    c.eval_branches = j.value("eval_branches", d.eval_branches);
}

void to_json(json& j, const RunConfig& c) {
    j = {{"world", c.world},
         {"data", c.data},
         {"encoders", variant_names(c.encoders)},
         {"encoder", c.encoder},
         {"readout", c.readout},
         {"forecaster", c.forecaster},
         {"regression", variant_names(c.regression)},
         {"samples", c.samples},
         {"sample_seed", c.sample_seed},
         {"out", c.out.string()}};
}

void from_json(const json& j, RunConfig& c) {
    static const std::set<std::string> known{"world",      "data",    "encoders",    "encoder", "readout",
                                             "forecaster", "regression", "samples", "sample_seed", "out"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    const RunConfig d;
    c.world = j.value("world", d.world);
    c.data = j.value("data", d.data);
    c.encoders = j.contains("encoders") ? parse_variants(j.at("encoders")) : d.encoders;
    c.encoder = j.value("encoder", d.encoder);
    c.readout = j.value("readout", d.readout);
    c.forecaster = j.value("forecaster", d.forecaster);
    c.regression = j.contains("regression") ? parse_variants(j.at("regression")) : d.regression;
    c.samples = j.value("samples", d.samples);
    c.sample_seed = j.value("sample_seed", d.sample_seed);
    c.out = j.value("out", d.out.string());
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig c = json::parse(numkit::read_text_file(path)).get<RunConfig>();
    c.validate();
    return c;
}

backbones::EncoderSpec encoder_spec(const RunConfig& c, Variant v) {
    backbones::EncoderSpec s = c.encoder;
    s.variant = v;
    s.image_height = c.world.height;
    s.image_width = c.world.width;
    s.seed = numkit::mix_seed(c.encoder.seed, static_cast<std::uint64_t>(v));
    return s;
}

readouts::ReadoutSpec readout_spec(const RunConfig& c, Variant v, Task t) {
    readouts::ReadoutSpec s = c.readout;
    s.task = t;
    s.seed = numkit::mix_seed(numkit::mix_seed(c.readout.seed, static_cast<std::uint64_t>(v)), static_cast<std::uint64_t>(t));
    return s;
}

forecaster::ForecasterSpec forecaster_spec(const RunConfig& c, const backbones::EncoderSpec& encoder,
                                           forecaster::Mode mode) {
    forecaster::ForecasterSpec s = c.forecaster;
    s.mode = mode;
    s.denoiser.token_dim = encoder.token_dim();
    s.denoiser.tokens_per_frame = encoder.tokens();
    s.denoiser.grid_width = encoder.grid_width();
    s.seed = numkit::mix_seed(c.forecaster.seed, static_cast<std::uint64_t>(encoder.variant));
    return s;
}

readouts::ReadoutGeometry readout_geometry(const backbones::EncoderSpec& encoder, const synthworld::WorldConfig& world) {
    return {encoder.token_dim(), encoder.patch, world.height, world.width, world.z_max};
}

std::string content_key(const json& j) { return numkit::sha256_hex(j.dump()).substr(0, 16); }

}  // namespace latentcast::harness
