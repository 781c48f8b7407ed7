#include "latentcast/synthworld/dataset.hpp"

#include "latentcast/numkit/io.hpp"
#include "latentcast/numkit/parallel.hpp"

#include <fmt/format.h>

#include <array>

namespace latentcast::synthworld {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> kChannels{"rgb", "depth", "tracks", "boxes"};

std::string_view shape_name(ShapeKind s) {
    switch (s) {
        case ShapeKind::rectangle: return "rectangle";
        case ShapeKind::ellipse: return "ellipse";
        case ShapeKind::triangle: return "triangle";
        case ShapeKind::diamond: return "diamond";
    }
    return "rectangle";
}

ShapeKind parse_shape(std::string_view name) {
    for (auto s : {ShapeKind::rectangle, ShapeKind::ellipse, ShapeKind::triangle, ShapeKind::diamond}) {
        if (shape_name(s) == name) return s;
    }
    throw ConfigError(fmt::format("world config: unknown shape '{}'", name));
}

Tensor& channel(Clip& clip, std::string_view name) {
    if (name == "rgb") return clip.rgb;
    if (name == "depth") return clip.depth;
    if (name == "tracks") return clip.tracks;
    return clip.boxes;
}

std::string clip_file(std::size_t index, std::string_view name) { return fmt::format("clip_{:05d}.{}.lten", index, name); }

}  // namespace

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::readout_train: return "readout-train";
        case Split::eval: return "eval";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    for (auto s : {Split::train, Split::readout_train, Split::eval}) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument(fmt::format("unknown split '{}'", name));
}

std::vector<ClipSeeds> Dataset::seeds() const {
    std::vector<ClipSeeds> out;
    out.reserve(clips.size());
    for (const auto& c : clips) out.push_back({c.world_seed, c.branch_seed});
    return out;
}

void to_json(json& j, const WorldConfig& c) {
    json palette = json::array();
    for (auto s : c.palette) palette.push_back(shape_name(s));
    j = json{{"height", c.height},
             {"width", c.width},
             {"frames", c.frames},
             {"objects", c.objects},
             {"palette", palette},
             {"size_min", c.size_min},
             {"size_max", c.size_max},
             {"z_min", c.z_min},
             {"z_max", c.z_max},
             {"speed_min", c.speed_min},
             {"speed_max", c.speed_max},
             {"branch_frame", c.branch_frame},
             {"branch_count", c.branch_count},
             {"tracked_points", c.tracked_points}};
}

void from_json(const json& j, WorldConfig& c) {
    WorldConfig d;
    c.height = j.value("height", d.height);
    c.width = j.value("width", d.width);
    c.frames = j.value("frames", d.frames);
    c.objects = j.value("objects", d.objects);
    if (j.contains("palette")) {
        c.palette.clear();
        for (const auto& s : j.at("palette")) c.palette.push_back(parse_shape(s.get<std::string>()));
    } else {
        c.palette = d.palette;
    }
    c.size_min = j.value("size_min", d.size_min);
    c.size_max = j.value("size_max", d.size_max);
    c.z_min = j.value("z_min", d.z_min);
    c.z_max = j.value("z_max", d.z_max);
    c.speed_min = j.value("speed_min", d.speed_min);
    c.speed_max = j.value("speed_max", d.speed_max);
    c.branch_frame = j.value("branch_frame", d.branch_frame);
    c.branch_count = j.value("branch_count", d.branch_count);
    c.tracked_points = j.value("tracked_points", d.tracked_points);
    c.validate();
}

std::vector<ClipSeeds> split_seeds(Split split, std::uint64_t base_seed, int worlds, int branches) {
    const auto stream = static_cast<std::uint64_t>(split) << 32;
    std::vector<ClipSeeds> out;
    for (int w = 0; w < worlds; ++w) {
        const std::uint64_t world = numkit::mix_seed(base_seed, stream + static_cast<std::uint64_t>(w));
        for (int b = 0; b < branches; ++b) out.push_back({world, static_cast<std::uint64_t>(b)});
    }
    return out;
}

Dataset make_dataset(const WorldConfig& config, Split split, const std::vector<ClipSeeds>& seeds) {
    config.validate();
    Dataset ds{config, split, std::vector<Clip>(seeds.size())};
    numkit::parallel_for(static_cast<std::int64_t>(seeds.size()), [&](std::int64_t i) {
        const auto& s = seeds[static_cast<std::size_t>(i)];
        ds.clips[static_cast<std::size_t>(i)] = generate_clip(s.world_seed, s.branch_seed, config);
    });
    return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json clips = json::array();
    for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
        Clip clip = dataset.clips[i];
        json files;
        for (auto name : kChannels) {
            const std::string file = clip_file(i, name);
            numkit::save_tensor(dir / file, channel(clip, name));
            files[std::string(name)] = file;
        }
        clips.push_back({{"world_seed", clip.world_seed}, {"branch_seed", clip.branch_seed}, {"files", files}});
    }
    json manifest{{"format", "latentcast-dataset"},
                  {"version", kDatasetFormatVersion},
                  {"split", to_string(dataset.split)},
                  {"config", dataset.config},
                  {"clips", clips}};
    numkit::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

json read_dataset_manifest(const std::filesystem::path& dir) {
    auto manifest = json::parse(numkit::read_text_file(dir / "manifest.json"));
    if (manifest.value("format", "") != "latentcast-dataset") {
        throw numkit::FormatError(dir.string() + ": not a dataset directory");
    }
    const int version = manifest.value("version", -1);
    if (version != kDatasetFormatVersion) {
        throw numkit::FormatError(fmt::format("{}: dataset version {} is not supported (expected {})", dir.string(),
                                              version, kDatasetFormatVersion));
    }
    return manifest;
}

Dataset read_dataset(const std::filesystem::path& dir) {
    const auto manifest = read_dataset_manifest(dir);
    Dataset ds;
    ds.config = manifest.at("config").get<WorldConfig>();
    ds.split = parse_split(manifest.at("split").get<std::string>());
    const auto& entries = manifest.at("clips");
    ds.clips.resize(entries.size());
    numkit::parallel_for(static_cast<std::int64_t>(entries.size()), [&](std::int64_t i) {
        const auto& entry = entries[static_cast<std::size_t>(i)];
        Clip& clip = ds.clips[static_cast<std::size_t>(i)];
        clip.world_seed = entry.at("world_seed").get<std::uint64_t>();
        clip.branch_seed = entry.at("branch_seed").get<std::uint64_t>();
        for (auto name : kChannels) {
            channel(clip, name) = numkit::load_tensor(dir / entry.at("files").at(std::string(name)).get<std::string>());
        }
    });
    const auto& c = ds.config;
    for (const auto& clip : ds.clips) {
        const numkit::Shape rgb{c.frames, c.height, c.width, 3};
        if (clip.rgb.shape() != rgb) throw numkit::ShapeError("read_dataset(rgb)", rgb, clip.rgb.shape());
    }
    return ds;
}

Dataset regenerate(const std::filesystem::path& dir) {
    const auto manifest = read_dataset_manifest(dir);
    std::vector<ClipSeeds> seeds;
    for (const auto& entry : manifest.at("clips")) {
        seeds.push_back({entry.at("world_seed").get<std::uint64_t>(), entry.at("branch_seed").get<std::uint64_t>()});
    }
    return make_dataset(manifest.at("config").get<WorldConfig>(), parse_split(manifest.at("split").get<std::string>()),
                        seeds);
}

}  // namespace latentcast::synthworld
