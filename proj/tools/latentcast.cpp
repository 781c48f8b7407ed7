// latentcast: command-line front end for the staged pipeline.

#include "latentcast/harness/pipeline.hpp"
#include "latentcast/harness/report.hpp"
#include "latentcast/harness/stages.hpp"
#include "latentcast/numkit/io.hpp"
#include "latentcast/numkit/parallel.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <iostream>

namespace fs = std::filesystem;
using namespace latentcast;
using harness::RunConfig;
using nlohmann::json;

namespace {

// A dataset argument may name one split directory or a generated data root
// holding train/, readout-train/ and eval/.
fs::path split_dir(const fs::path& data, synthworld::Split split) {
    const fs::path sub = data / std::string(synthworld::to_string(split));
    return fs::is_directory(sub) ? sub : data;
}

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : harness::load_config(path); }

harness::ReadoutPaths parse_readouts(const std::vector<std::string>& specs) {
    harness::ReadoutPaths out;
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--readout expects task=path, got " + s);
        out[readouts::parse_task(s.substr(0, eq))] = s.substr(eq + 1);
    }
    return out;
}

std::vector<evalkit::MetricReport> collect_reports(const fs::path& root) {
    // Either a run directory (eval/*/report.json) or a list of report files.
    std::vector<fs::path> files;
    if (fs::is_regular_file(root)) {
        files.push_back(root);
    } else if (fs::is_directory(root / "eval")) {
        for (const auto& e : fs::directory_iterator(root / "eval")) {
            if (fs::exists(e.path() / "report.json")) files.push_back(e.path() / "report.json");
        }
    } else if (fs::exists(root / "report.json")) {
        files.push_back(root / "report.json");
    }
    std::sort(files.begin(), files.end());
    std::vector<evalkit::MetricReport> reports;
    for (const auto& f : files) reports.push_back(json::parse(numkit::read_text_file(f)).get<evalkit::MetricReport>());
    if (reports.empty()) throw std::invalid_argument(root.string() + ": no evaluation reports found");
    // Diffusion rows first, then baselines, each in encoder order.
    std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
        return std::tie(a.forecaster, a.encoder) < std::tie(b.forecaster, b.encoder);
    });
    return reports;
}

}  // namespace

int main(int argc, char** argv) {
    numkit::configure_allocator();
    spdlog::set_pattern("[%H:%M:%S] %v");

    CLI::App app{"Latent forecasting on frozen video encoders, with task readouts and evaluation."};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
    auto common = [&](CLI::App* sub, bool out_required) {
        sub->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Seed override");
        auto* o = sub->add_option("--out", out, "Output directory");
        if (out_required) o->required();
        sub->add_flag("-q,--quiet", quiet, "Only log warnings and errors");
    };

    auto* gen = app.add_subcommand("generate", "Render one dataset split");
    common(gen, true);
    std::string split_name = "train";
    int clips = 0, branches = 0;
    gen->add_option("--split", split_name, "train, readout-train or eval")->capture_default_str();
    gen->add_option("--clips", clips, "Number of clips (worlds x branches); defaults to the config")->check(CLI::PositiveNumber);
    gen->add_option("--branches", branches, "Futures per world; defaults to 1, or the config's eval_branches for eval")
        ->check(CLI::PositiveNumber);

    auto* tenc = app.add_subcommand("train-encoder", "Build and, for masked variants, pretrain an encoder");
    common(tenc, true);
    std::string variant, data;
    tenc->add_option("--variant", variant, "random-frozen, pixel-identity, image-mae or video-mae")->required();
    tenc->add_option("--data", data, "Train-split dataset (unused by untrained variants)");

    auto* tread = app.add_subcommand("train-readout", "Train a task readout on a frozen encoder");
    common(tread, true);
    std::string task, encoder;
    tread->add_option("--task", task, "pixels, depth, points or boxes")->required();
    tread->add_option("--encoder", encoder, "Encoder checkpoint")->required()->check(CLI::ExistingDirectory);
    tread->add_option("--data", data, "Readout-train dataset")->required()->check(CLI::ExistingDirectory);

    auto* tfc = app.add_subcommand("train-forecaster", "Train a latent forecaster on a frozen encoder");
    common(tfc, true);
    std::string mode_name = "diffusion";
    tfc->add_option("--encoder", encoder, "Encoder checkpoint")->required()->check(CLI::ExistingDirectory);
    tfc->add_option("--data", data, "Train-split dataset")->required()->check(CLI::ExistingDirectory);
    tfc->add_option("--mode", mode_name, "diffusion or regression")->capture_default_str();

    auto* samp = app.add_subcommand("sample", "Sample forecasts for every eval example");
    common(samp, true);
    std::string forecaster_dir;
    int n = 0;
    samp->add_option("--forecaster", forecaster_dir, "Forecaster checkpoint")->required()->check(CLI::ExistingDirectory);
    samp->add_option("--data", data, "Eval dataset supplying the context frames")->required()->check(CLI::ExistingDirectory);
    samp->add_option("--n", n, "Samples per example; defaults to the config")->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("evaluate", "Decode sampled forecasts and score them");
    common(ev, true);
    std::string samples_dir, perception_dir;
    std::vector<std::string> readout_specs;
    ev->add_option("--forecaster", forecaster_dir, "Forecaster checkpoint")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--samples", samples_dir, "Output of `sample`")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--readout", readout_specs, "task=checkpoint, once per task")->required();
    ev->add_option("--data", data, "Eval dataset")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--encoder", encoder, "Encoder checkpoint for the perception column")->check(CLI::ExistingDirectory);

    auto* rep = app.add_subcommand("report", "Tables, CSV and scatter plot from evaluation reports");
    common(rep, true);
    std::vector<std::string> inputs;
    rep->add_option("inputs", inputs, "Run directories, evaluation directories or report.json files")->required();

    auto* run = app.add_subcommand("run", "Run every stage, resuming completed ones");
    common(run, false);

    CLI11_PARSE(app, argc, argv);
    if (quiet) spdlog::set_level(spdlog::level::warn);

    try {
        RunConfig config = config_from(config_path);
        if (*gen) {
            const auto split = synthworld::parse_split(split_name);
            const int b = branches > 0 ? branches : (split == synthworld::Split::eval ? config.data.eval_branches : 1);
            int worlds = split == synthworld::Split::train           ? config.data.train_worlds
                         : split == synthworld::Split::readout_train ? config.data.readout_worlds
                                                                      : config.data.eval_worlds;
            if (clips > 0) {
                if (clips % b != 0) throw std::invalid_argument(fmt::format("--clips {} is not a multiple of {} branches", clips, b));
                worlds = clips / b;
            }
            harness::generate_dataset(config.world, split, seed.value_or(config.data.seed), worlds, b, out);
        } else if (*tenc) {
            auto spec = harness::encoder_spec(config, backbones::parse_variant(variant));
            if (seed) spec.seed = *seed;
            if (spec.trainable() && data.empty()) throw std::invalid_argument("--data is required for " + variant);
            const auto sum = harness::train_encoder(spec, data.empty() ? fs::path{} : split_dir(data, synthworld::Split::train), out);
            std::cout << "encoder checksum " << sum << "\n";
        } else if (*tread) {
            const auto enc = backbones::Encoder::load(encoder);
            auto spec = harness::readout_spec(config, enc.spec().variant, readouts::parse_task(task));
            if (seed) spec.seed = *seed;
            const auto sum = harness::train_readout(spec, encoder, split_dir(data, synthworld::Split::readout_train), out);
            std::cout << "readout checksum " << sum << "\n";
        } else if (*tfc) {
            const auto enc = backbones::Encoder::load(encoder);
            auto spec = harness::forecaster_spec(config, enc.spec(), forecaster::parse_mode(mode_name));
            if (seed) spec.seed = *seed;
            const auto sum = harness::train_forecaster(spec, encoder, split_dir(data, synthworld::Split::train), out);
            std::cout << "forecaster checksum " << sum << "\n";
        } else if (*samp) {
            harness::sample_forecasts(forecaster_dir, split_dir(data, synthworld::Split::eval), n > 0 ? n : config.samples,
                                      seed.value_or(config.sample_seed), out);
        } else if (*ev) {
            const auto heads = parse_readouts(readout_specs);
            const fs::path eval = split_dir(data, synthworld::Split::eval);
            fs::path perception;
            if (!encoder.empty()) {
                perception = fs::path(out) / "perception";
                harness::evaluate_perception(encoder, heads, eval, perception);
            }
            const auto report = harness::evaluate_forecasts(forecaster_dir, samples_dir, heads, eval, perception, out);
            harness::write_report(std::span(&report, 1), fs::path(out) / "summary");
        } else if (*rep) {
            std::vector<evalkit::MetricReport> reports;
            for (const auto& in : inputs) {
                auto more = collect_reports(in);
                reports.insert(reports.end(), more.begin(), more.end());
            }
            harness::write_report(reports, out);
            std::cout << numkit::read_text_file(fs::path(out) / "tables.md");
        } else if (*run) {
            if (!out.empty()) config.out = out;
            if (seed) {
                config.data.seed = *seed;
                config.sample_seed = numkit::mix_seed(*seed, 7);
            }
            harness::Pipeline pipeline(config);
            const auto manifest = pipeline.run();
            const fs::path report_dir = pipeline.report();
            std::cout << numkit::read_text_file(report_dir / "tables.md");
            std::cout << "report: " << report_dir.string() << "\nmanifest: " << pipeline.manifest_path().string() << "\n";
            bool frozen = true;
            for (const auto& [dir, check] : manifest.frozen_checks.items()) frozen = frozen && check.at("ok").get<bool>();
            if (!frozen) return 3;
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
