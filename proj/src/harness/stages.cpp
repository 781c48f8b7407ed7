#include "latentcast/harness/stages.hpp"

#include "latentcast/backbones/normalization.hpp"
#include "latentcast/backbones/pretrain.hpp"
#include "latentcast/numkit/io.hpp"
#include "latentcast/numkit/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace latentcast::harness {

using backbones::Encoder;
using backbones::LatentTrajectory;
using forecaster::Forecaster;
using nlohmann::json;
using numkit::Tensor;
using synthworld::Dataset;
using synthworld::Split;

namespace {

constexpr int kContext = synthworld::kContextFrames;
constexpr int kFuture = synthworld::kFutureFrames;

Dataset read_split(const fs::path& dir, Split expected) {
    Dataset ds = synthworld::read_dataset(dir);
    if (ds.split != expected) {
        throw std::invalid_argument(fmt::format("{}: expected a {} dataset, found {}", dir.string(),
                                                synthworld::to_string(expected), synthworld::to_string(ds.split)));
    }
    return ds;
}

std::vector<LatentTrajectory> encode_all(const Encoder& enc, std::span<const synthworld::Clip* const> clips) {
    std::vector<LatentTrajectory> out(clips.size());
    numkit::parallel_for(static_cast<std::int64_t>(clips.size()),
                         [&](std::int64_t i) { out[static_cast<std::size_t>(i)] = enc.encode(*clips[static_cast<std::size_t>(i)]); });
    return out;
}

std::vector<const synthworld::Clip*> all_clips(const Dataset& ds) {
    std::vector<const synthworld::Clip*> out;
    for (const auto& c : ds.clips) out.push_back(&c);
    return out;
}

std::vector<Tensor> tokens_of(std::vector<LatentTrajectory>&& latents) {
    std::vector<Tensor> out;
    out.reserve(latents.size());
    for (auto& l : latents) out.push_back(std::move(l.tokens));
    return out;
}

fs::path source_encoder(const fs::path& forecaster) {
    // Stored relative to the forecaster directory so a run can be moved.
    const json src = json::parse(numkit::read_text_file(forecaster / "source.json"));
    return (forecaster / src.at("encoder").get<std::string>()).lexically_normal();
}

// [4, N, D] raw context followed by [12, N, D] raw future.
Tensor join_frames(const Tensor& context, const float* future) {
    Tensor out({kContext + kFuture, context.dim(1), context.dim(2)});
    std::copy_n(context.ptr(), kContext * context.dim(1) * context.dim(2), out.ptr());
    std::copy_n(future, kFuture * context.dim(1) * context.dim(2), out.ptr() + kContext * context.dim(1) * context.dim(2));
    return out;
}

std::map<Task, readouts::ReadoutHead> load_heads(const ReadoutPaths& paths) {
    std::map<Task, readouts::ReadoutHead> heads;
    for (const auto& [task, path] : paths) {
        auto head = readouts::ReadoutHead::load(path);
        if (head.task() != task) throw std::invalid_argument(path.string() + ": readout is for another task");
        heads.emplace(task, std::move(head));
    }
    return heads;
}

std::vector<evalkit::TrajectoryVector> ground_truth(const Dataset& eval, Task task, int parity = -1) {
    std::vector<evalkit::TrajectoryVector> out;
    for (const auto& clip : eval.clips) {
        if (parity >= 0 && static_cast<int>(clip.branch_seed % 2) != parity) continue;
        auto v = evalkit::vectorize(task, evalkit::slice_frames(readouts::task_target(clip, task), task, kContext, kFuture));
        out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    }
    return out;
}

}  // namespace

std::vector<const synthworld::Clip*> realized_clips(const Dataset& eval) {
    std::vector<const synthworld::Clip*> out;
    for (const auto& c : eval.clips) {
        if (c.branch_seed == 0) out.push_back(&c);
    }
    return out;
}

void generate_dataset(const synthworld::WorldConfig& world, Split split, std::uint64_t seed, int worlds, int branches,
                      const fs::path& out) {
    const Dataset ds = synthworld::make_dataset(world, split, synthworld::split_seeds(split, seed, worlds, branches));
    synthworld::write_dataset(ds, out);
}

std::string train_encoder(const backbones::EncoderSpec& spec, const fs::path& data, const fs::path& out) {
    Encoder enc(spec);
    if (spec.trainable()) {
        const Dataset ds = read_split(data, Split::train);
        const auto report = backbones::pretrain_encoder(enc, ds);
        spdlog::info("encoder {}: reconstruction loss {:.4f} -> {:.4f}", enc.name(), report.losses.front(),
                     report.losses.back());
    }
    enc.save(out);
    return enc.checksum();
}

std::string train_readout(const readouts::ReadoutSpec& spec, const fs::path& encoder, const fs::path& data,
                          const fs::path& out) {
    const Encoder enc = Encoder::load(encoder);
    const Dataset ds = read_split(data, Split::readout_train);
    const auto latents = tokens_of(encode_all(enc, all_clips(ds)));
    readouts::ReadoutHead head(spec, readout_geometry(enc.spec(), ds.config));
    const auto report = readouts::train_readout(head, ds, latents);
    spdlog::info("readout {}/{}: loss {:.4f} -> {:.4f}", enc.name(), readouts::to_string(spec.task),
                 report.losses.front(), report.losses.back());
    head.save(out);
    return head.checksum();
}

void compute_norm(const fs::path& encoder, const fs::path& data, const fs::path& out) {
    const Encoder enc = Encoder::load(encoder);
    const Dataset ds = read_split(data, Split::train);
    backbones::save_norm_stats(out, backbones::compute_norm_stats(encode_all(enc, all_clips(ds))));
}

std::string train_forecaster(forecaster::ForecasterSpec spec, const fs::path& encoder, const fs::path& data,
                             const fs::path& out, const fs::path& norm) {
    const Encoder enc = Encoder::load(encoder);
    spec.denoiser.token_dim = enc.spec().token_dim();
    spec.denoiser.tokens_per_frame = enc.spec().tokens();
    spec.denoiser.grid_width = enc.spec().grid_width();
    std::vector<LatentTrajectory> latents;
    {
        const Dataset ds = read_split(data, Split::train);
        latents = encode_all(enc, all_clips(ds));
    }
    const auto stats = norm.empty() ? backbones::compute_norm_stats(latents) : backbones::load_norm_stats(norm);
    for (auto& l : latents) l = backbones::normalize(l, stats);
    Forecaster model(spec);
    const auto report = spec.mode == forecaster::Mode::diffusion ? forecaster::train_diffusion(model, latents)
                                                                 : forecaster::train_regression(model, latents);
    spdlog::info("forecaster {}/{}: loss {:.4f} -> {:.4f}", enc.name(), forecaster::to_string(spec.mode),
                 report.losses.front(), report.losses.back());
    model.save(out / "model");
    backbones::save_norm_stats(out / "norm", stats);
    numkit::write_text_file(out / "source.json", json{{"encoder", fs::relative(fs::absolute(encoder), fs::absolute(out)).generic_string()}}.dump(2) + "\n");
    return model.checksum();
}

void sample_forecasts(const fs::path& forecaster_dir, const fs::path& data, int n, std::uint64_t seed,
                      const fs::path& out) {
    const Encoder enc = Encoder::load(source_encoder(forecaster_dir));
    const Forecaster model = Forecaster::load(forecaster_dir / "model");
    const auto stats = backbones::load_norm_stats(forecaster_dir / "norm");
    const Dataset ds = read_split(data, Split::eval);
    const auto examples = realized_clips(ds);
    std::vector<Tensor> contexts;
    for (auto& l : encode_all(enc, examples)) {
        contexts.push_back(forecaster::frames_of(backbones::normalize(l, stats).tokens, 0, kContext));
    }
    const bool diffusion = model.spec().mode == forecaster::Mode::diffusion;
    fs::create_directories(out);
    if (diffusion) {
        const auto sets = forecaster::sample_many(model, contexts, n, seed);
        for (std::size_t e = 0; e < sets.size(); ++e) {
            numkit::save_tensor(out / fmt::format("example_{:05d}.lten", e), sets[e].samples);
        }
    } else {
        for (std::size_t e = 0; e < contexts.size(); ++e) {
            Tensor y = forecaster::regress(model, contexts[e]);
            auto shape = y.shape();
            shape.insert(shape.begin(), 1);
            numkit::save_tensor(out / fmt::format("example_{:05d}.lten", e), y.reshaped(shape));
        }
    }
    const json manifest = {{"examples", contexts.size()},
                           {"samples", diffusion ? n : 1},
                           {"seed", seed},
                           {"mode", forecaster::to_string(model.spec().mode)},
                           {"sampler_steps", diffusion ? model.schedule().steps : 0}};
    numkit::write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
}

std::map<Task, std::optional<double>> evaluate_perception(const fs::path& encoder, const ReadoutPaths& readouts,
                                                          const fs::path& data, const fs::path& out) {
    const Encoder enc = Encoder::load(encoder);
    const auto heads = load_heads(readouts);
    const Dataset ds = read_split(data, Split::eval);
    const auto examples = realized_clips(ds);
    const auto latents = encode_all(enc, examples);
    std::map<Task, std::optional<double>> result;
    json j = json::object();
    for (const auto& [task, head] : heads) {
        std::vector<std::optional<double>> values(examples.size());
        numkit::parallel_for(static_cast<std::int64_t>(examples.size()), [&](std::int64_t i) {
            const auto& clip = *examples[static_cast<std::size_t>(i)];
            const Tensor pred = head.decode(latents[static_cast<std::size_t>(i)].tokens, readouts::task_queries(clip, task)).values;
            values[static_cast<std::size_t>(i)] = evalkit::task_metric(
                task, evalkit::slice_frames(pred, task, kContext, kFuture),
                evalkit::slice_frames(readouts::task_target(clip, task), task, kContext, kFuture), ds.config.width);
        });
        double total = 0.0;
        int count = 0;
        for (const auto& v : values) {
            if (v) {
                total += *v;
                ++count;
            }
        }
        result[task] = count > 0 ? std::optional(total / count) : std::nullopt;
        j[std::string(readouts::to_string(task))] = result[task] ? json(*result[task]) : json();
    }
    fs::create_directories(out);
    numkit::write_text_file(out / "perception.json", j.dump(2) + "\n");
    return result;
}

evalkit::MetricReport evaluate_forecasts(const fs::path& forecaster_dir, const fs::path& samples,
                                         const ReadoutPaths& readouts, const fs::path& data,
                                         const fs::path& perception, const fs::path& out) {
    const Encoder enc = Encoder::load(source_encoder(forecaster_dir));
    const auto stats = backbones::load_norm_stats(forecaster_dir / "norm");
    const auto heads = load_heads(readouts);
    const json sample_meta = json::parse(numkit::read_text_file(samples / "manifest.json"));
    const json perceived = perception.empty() ? json::object()
                                              : json::parse(numkit::read_text_file(perception / "perception.json"));
    const Dataset ds = read_split(data, Split::eval);
    const auto examples = realized_clips(ds);
    if (sample_meta.at("examples").get<std::size_t>() != examples.size()) {
        throw std::invalid_argument("evaluate: sample set does not match the eval dataset");
    }
    const auto contexts = encode_all(enc, examples);
    std::vector<Tensor> forecasts;
    for (std::size_t e = 0; e < examples.size(); ++e) {
        forecasts.push_back(numkit::load_tensor(samples / fmt::format("example_{:05d}.lten", e)));
    }

    evalkit::MetricReport report;
    report.encoder = enc.name();
    report.forecaster = sample_meta.at("mode").get<std::string>();
    report.samples = sample_meta.at("samples").get<int>();
    for (const auto& [task, head] : heads) {
        evalkit::TaskReport tr;
        tr.task = task;
        std::vector<std::vector<std::optional<double>>> metrics(examples.size());
        std::vector<std::vector<evalkit::TrajectoryVector>> predicted(examples.size());
        std::vector<char> diverse(examples.size(), 0);
        numkit::parallel_for(static_cast<std::int64_t>(examples.size()), [&](std::int64_t ei) {
            const auto e = static_cast<std::size_t>(ei);
            const auto& clip = *examples[e];
            const Tensor context = forecaster::frames_of(contexts[e].tokens, 0, kContext);
            const Tensor queries = readouts::task_queries(clip, task);
            const Tensor truth = evalkit::slice_frames(readouts::task_target(clip, task), task, kContext, kFuture);
            const Tensor& set = forecasts[e];
            const std::int64_t per = set.size() / set.dim(0);
            std::vector<Tensor> windows;
            for (std::int64_t s = 0; s < set.dim(0); ++s) {
                Tensor future({kFuture, set.dim(2), set.dim(3)});
                std::copy_n(set.ptr() + s * per, per, future.ptr());
                const Tensor raw = backbones::denormalize_tokens(future, stats);
                const Tensor pred = head.decode(join_frames(context, raw.ptr()), queries).values;
                windows.push_back(evalkit::slice_frames(pred, task, kContext, kFuture));
                metrics[e].push_back(evalkit::task_metric(task, windows.back(), truth, ds.config.width));
                auto v = evalkit::vectorize(task, windows.back());
                predicted[e].insert(predicted[e].end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
            }
            if (task == Task::boxes) {
                // Final-frame box centres of each object across samples.
                const std::int64_t objects = windows.front().dim(0);
                for (std::int64_t k = 0; k < objects && !diverse[e]; ++k) {
                    for (std::size_t a = 0; a < windows.size() && !diverse[e]; ++a) {
                        for (std::size_t b = a + 1; b < windows.size(); ++b) {
                            const float* p = windows[a].ptr() + (k * kFuture + kFuture - 1) * 4;
                            const float* q = windows[b].ptr() + (k * kFuture + kFuture - 1) * 4;
                            const double dx = 0.5 * ((p[0] + p[2]) - (q[0] + q[2]));
                            const double dy = 0.5 * ((p[1] + p[3]) - (q[1] + q[3]));
                            if (std::hypot(dx, dy) > evalkit::kDiversityPx) {
                                diverse[e] = 1;
                                break;
                            }
                        }
                    }
                }
            }
        });
        evalkit::summarize_examples(tr, metrics);
        std::vector<evalkit::TrajectoryVector> pred_all;
        for (auto& p : predicted) pred_all.insert(pred_all.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
        const auto gt = ground_truth(ds, task);
        const auto gt_fit = evalkit::fit_trajectories(evalkit::filter_complete(gt));
        evalkit::summarize_distribution(tr, pred_all, gt, gt_fit ? &*gt_fit : nullptr);
        const auto even = evalkit::fit_trajectories(evalkit::filter_complete(ground_truth(ds, task, 0)));
        const auto odd = evalkit::fit_trajectories(evalkit::filter_complete(ground_truth(ds, task, 1)), false);
        if (even && odd) tr.fd_self = evalkit::frechet_distance(*even, *odd);
        if (task == Task::boxes && report.samples > 1) {
            tr.diversity = static_cast<double>(std::count(diverse.begin(), diverse.end(), 1)) /
                           static_cast<double>(examples.size());
        }
        const std::string name(readouts::to_string(task));
        if (perceived.contains(name) && !perceived.at(name).is_null()) tr.perception = perceived.at(name).get<double>();
        spdlog::info("evaluate {}/{}/{}: mean {} best {} fd {}", report.encoder, report.forecaster, name,
                     tr.mean.value_or(NAN), tr.best.value_or(NAN), tr.fd.value_or(NAN));
        report.tasks.push_back(std::move(tr));
    }
    fs::create_directories(out);
    numkit::write_text_file(out / "report.json", json(report).dump(2) + "\n");
    return report;
}

}  // namespace latentcast::harness
