#include "latentcast/forecaster/diffusion.hpp"

#include "latentcast/numkit/io.hpp"
#include "latentcast/numkit/optim.hpp"
#include "latentcast/numkit/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>

namespace latentcast::forecaster {

namespace {

using numkit::Shape;

// Sequences denoised together; fixed so results do not depend on threads.
constexpr std::int64_t kSampleChunk = 16;

void check_training_set(const Forecaster& model, std::span<const backbones::LatentTrajectory> train, Mode mode,
                        const char* op) {
    if (model.spec().mode != mode) {
        throw std::invalid_argument(fmt::format("{}: model is configured for {}", op, to_string(model.spec().mode)));
    }
    if (model.trained()) throw std::logic_error(fmt::format("{}: model is already trained", op));
    if (train.empty()) throw std::invalid_argument(fmt::format("{}: empty training set", op));
    const auto& d = model.spec().denoiser;
    const Shape expected{kContextFrames + kFutureFrames, d.tokens_per_frame, d.token_dim};
    for (const auto& t : train) {
        if (!t.normalized) {
            throw std::invalid_argument(fmt::format("{}: latents from {} are not normalized; apply compute_norm_stats first",
                                                    op, t.encoder.empty() ? "an encoder" : t.encoder));
        }
        if (t.tokens.shape() != expected) throw numkit::ShapeError(op, t.tokens.shape(), expected);
    }
}

struct Batch {
    Tensor context;  // [B, 4, N, D]
    Tensor future;   // [B, 12, N, D]
};

Batch draw_batch(const Forecaster& model, std::span<const backbones::LatentTrajectory> train, numkit::Rng& rng) {
    const auto& d = model.spec().denoiser;
    const std::int64_t b = model.spec().batch, n = d.tokens_per_frame, dim = d.token_dim;
    const std::int64_t ctx = kContextFrames * n * dim, fut = kFutureFrames * n * dim;
    Batch out{Tensor({b, kContextFrames, n, dim}), Tensor({b, kFutureFrames, n, dim})};
    for (std::int64_t i = 0; i < b; ++i) {
        const auto& t = train[static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(train.size())))].tokens;
        std::copy_n(t.ptr(), ctx, out.context.ptr() + i * ctx);
        std::copy_n(t.ptr() + ctx, fut, out.future.ptr() + i * fut);
    }
    return out;
}

template <typename MakeLoss>
TrainReport fit(Forecaster& model, std::span<const backbones::LatentTrajectory> train, const char* op, MakeLoss&& make_loss) {
    const auto& spec = model.spec();
    numkit::Rng rng(numkit::mix_seed(spec.seed, 0xD1FF));
    numkit::OptimizerState opt;
    opt.config.clip_norm = 1.0;
    TrainReport report;
    for (int step = 0; step < spec.train_steps; ++step) {
        opt.config.learning_rate = numkit::warmup_cosine(spec.learning_rate, step, spec.train_steps, spec.train_steps / 20);
        const Batch batch = draw_batch(model, train, rng);
        Graph g;
        const Var loss = make_loss(g, batch, rng);
        const double value = loss.value().item();
        if (!std::isfinite(value)) {
            throw numkit::TrainingDiverged(fmt::format("{}: loss {} at step {} (lr {:.3g}, last finite {:.4g})", op, value, step,
                                                       opt.config.learning_rate,
                                                       report.losses.empty() ? 0.0 : report.losses.back()));
        }
        report.losses.push_back(value);
        model.denoiser().params().zero_grad();
        g.backward(loss);
        numkit::adam_step(opt, model.denoiser().params());
        if (step % 200 == 0 || step + 1 == spec.train_steps) spdlog::debug("{} step {} loss {:.5f}", op, step, value);
    }
    model.mark_trained();
    return report;
}

void check_context(const Forecaster& model, const Tensor& context) {
    const auto& d = model.spec().denoiser;
    const Shape expected{kContextFrames, d.tokens_per_frame, d.token_dim};
    if (context.shape() != expected) throw numkit::ShapeError("forecast context", context.shape(), expected);
    if (!model.trained()) throw std::logic_error("forecast: model is untrained");
}

// Denoises one chunk of sequences; seeds[i] drives sequence i's noise.
void run_sampler(const Forecaster& model, std::span<const Tensor* const> contexts, std::span<const std::uint64_t> seeds,
                 float* out) {
    const auto& d = model.spec().denoiser;
    const auto& sch = model.schedule();
    const std::int64_t b = static_cast<std::int64_t>(seeds.size());
    const std::int64_t n = d.tokens_per_frame, dim = d.token_dim;
    const std::int64_t ctx = kContextFrames * n * dim, fut = kFutureFrames * n * dim;

    Tensor context({b, kContextFrames, n, dim});
    Tensor x({b, kFutureFrames, n, dim});
    std::vector<numkit::Rng> rngs;
    for (std::int64_t i = 0; i < b; ++i) {
        std::copy_n(contexts[static_cast<std::size_t>(i)]->ptr(), ctx, context.ptr() + i * ctx);
        rngs.emplace_back(seeds[static_cast<std::size_t>(i)]);
        for (std::int64_t k = 0; k < fut; ++k) x[i * fut + k] = static_cast<float>(rngs.back().normal());
    }
    std::vector<int> steps(static_cast<std::size_t>(b));
    for (int s = sch.steps; s >= 1; --s) {
        std::fill(steps.begin(), steps.end(), s);
        Graph g;
        const Tensor eps = model.denoiser()(g, context, x, steps).value();
        const double inv_sqrt_alpha = 1.0 / std::sqrt(sch.alpha_at(s));
        const double eps_coef = sch.beta_at(s) / std::sqrt(1.0 - sch.alpha_bar_at(s));
        const double sigma = std::sqrt(sch.posterior_variance(s));
        for (std::int64_t i = 0; i < b; ++i) {
            auto& rng = rngs[static_cast<std::size_t>(i)];
            for (std::int64_t k = i * fut; k < (i + 1) * fut; ++k) {
                double v = inv_sqrt_alpha * (x[k] - eps_coef * eps[k]);
                if (s > 1) v += sigma * rng.normal();
                x[k] = static_cast<float>(v);
            }
        }
    }
    std::copy_n(x.ptr(), x.size(), out);
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::diffusion ? "diffusion" : "regression"; }

Mode parse_mode(std::string_view name) {
    if (name == "diffusion") return Mode::diffusion;
    if (name == "regression") return Mode::regression;
    throw std::invalid_argument(fmt::format("unknown forecaster mode '{}'", name));
}

void ForecasterSpec::validate() const {
    denoiser.validate();
    if (train_steps < 0 || batch < 1 || learning_rate <= 0.0) throw std::invalid_argument("forecaster spec: invalid training budget");
    NoiseSchedule::linear(schedule_steps);
}

void to_json(nlohmann::json& j, const ForecasterSpec& s) {
    j = nlohmann::json{{"mode", to_string(s.mode)},       {"denoiser", s.denoiser},
                       {"schedule_steps", s.schedule_steps}, {"train_steps", s.train_steps},
                       {"batch", s.batch},                {"learning_rate", s.learning_rate},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, ForecasterSpec& s) {
    const ForecasterSpec d;
    s.mode = parse_mode(j.value("mode", std::string(to_string(d.mode))));
    s.denoiser = j.value("denoiser", d.denoiser);
    s.schedule_steps = j.value("schedule_steps", d.schedule_steps);
    s.train_steps = j.value("train_steps", d.train_steps);
    s.batch = j.value("batch", d.batch);
    s.learning_rate = j.value("learning_rate", d.learning_rate);
    s.seed = j.value("seed", d.seed);
    s.validate();
}

Forecaster::Forecaster(ForecasterSpec spec) : spec_(std::move(spec)) {
    spec_.denoiser.max_step = spec_.schedule_steps;
    spec_.validate();
    schedule_ = NoiseSchedule::linear(spec_.schedule_steps);
    numkit::Rng rng(numkit::mix_seed(spec_.seed, 0xF0CA));
    // E[eps | x_s] when x0 is standard normal and independent of eps; step 0
    // (regression input) has no noisy signal.
    std::vector<double> gain(static_cast<std::size_t>(schedule_.steps + 1), 0.0);
    if (spec_.mode == Mode::diffusion) {
        for (int s = 1; s <= schedule_.steps; ++s) gain[static_cast<std::size_t>(s)] = std::sqrt(1.0 - schedule_.alpha_bar_at(s));
    }
    net_ = Denoiser(spec_.denoiser, rng, gain);
}

std::string Forecaster::checksum() const { return numkit::checksum(net_.params()); }

void Forecaster::save(const std::filesystem::path& dir) const {
    numkit::save_checkpoint(dir, net_.params(), {{"kind", "forecaster"}, {"spec", spec_}, {"trained", trained_}});
}

Forecaster Forecaster::load(const std::filesystem::path& dir) {
    const auto meta = numkit::read_checkpoint_meta(dir);
    if (meta.value("kind", "") != "forecaster") throw numkit::FormatError(dir.string() + ": not a forecaster checkpoint");
    Forecaster model(meta.at("spec").get<ForecasterSpec>());
    numkit::load_checkpoint(dir, model.net_.params());
    model.trained_ = meta.value("trained", false);
    return model;
}

TrainReport train_diffusion(Forecaster& model, std::span<const backbones::LatentTrajectory> train) {
    check_training_set(model, train, Mode::diffusion, "train_diffusion");
    const int s_max = model.schedule().steps;
    return fit(model, train, "train_diffusion", [&](Graph& g, const Batch& batch, numkit::Rng& rng) {
        const std::int64_t b = batch.future.dim(0), per = batch.future.size() / b;
        Tensor eps = rng.normal_tensor<float>(batch.future.shape());
        Tensor noisy(batch.future.shape());
        std::vector<int> steps(static_cast<std::size_t>(b));
        for (std::int64_t i = 0; i < b; ++i) {
            const int s = 1 + static_cast<int>(rng.below(s_max));
            steps[static_cast<std::size_t>(i)] = s;
            const auto ab = static_cast<float>(model.schedule().alpha_bar_at(s));
            const float a = std::sqrt(ab), c = std::sqrt(1.0f - ab);
            for (std::int64_t k = i * per; k < (i + 1) * per; ++k) noisy[k] = a * batch.future[k] + c * eps[k];
        }
        return numkit::mse(model.denoiser()(g, batch.context, noisy, steps), eps);
    });
}

double diffusion_loss(const Forecaster& model, std::span<const backbones::LatentTrajectory> data, int draws,
                      std::uint64_t seed, int s_min, int s_max) {
    if (data.empty() || draws < 1) throw std::invalid_argument("diffusion_loss: need data and draws >= 1");
    if (s_max == 0) s_max = model.schedule().steps;
    model.schedule().index(s_min);
    model.schedule().index(s_max);
    if (s_min > s_max) throw std::invalid_argument("diffusion_loss: empty step range");
    const auto& d = model.spec().denoiser;
    const std::int64_t n = d.tokens_per_frame, dim = d.token_dim;
    const std::int64_t ctx = kContextFrames * n * dim, fut = kFutureFrames * n * dim;
    numkit::Rng rng(seed);
    double total = 0.0;
    for (int start = 0; start < draws; start += static_cast<int>(kSampleChunk)) {
        const int b = std::min<int>(static_cast<int>(kSampleChunk), draws - start);
        Tensor context({b, kContextFrames, n, dim}), noisy({b, kFutureFrames, n, dim});
        Tensor eps = rng.normal_tensor<float>(noisy.shape());
        std::vector<int> steps(static_cast<std::size_t>(b));
        for (int i = 0; i < b; ++i) {
            const auto& t = data[static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(data.size())))].tokens;
            const int s = s_min + static_cast<int>(rng.below(s_max - s_min + 1));
            steps[static_cast<std::size_t>(i)] = s;
            std::copy_n(t.ptr(), ctx, context.ptr() + i * ctx);
            const auto ab = static_cast<float>(model.schedule().alpha_bar_at(s));
            const float a = std::sqrt(ab), c = std::sqrt(1.0f - ab);
            for (std::int64_t k = 0; k < fut; ++k) noisy[i * fut + k] = a * t[ctx + k] + c * eps[i * fut + k];
        }
        Graph g;
        const Tensor pred = model.denoiser()(g, context, noisy, steps).value();
        total += (pred.array() - eps.array()).square().cast<double>().sum();
    }
    return total / (static_cast<double>(draws) * static_cast<double>(fut));
}

TrainReport train_regression(Forecaster& model, std::span<const backbones::LatentTrajectory> train) {
    check_training_set(model, train, Mode::regression, "train_regression");
    return fit(model, train, "train_regression", [&](Graph& g, const Batch& batch, numkit::Rng&) {
        const std::vector<int> steps(static_cast<std::size_t>(batch.future.dim(0)), 0);
        return numkit::mse(model.denoiser()(g, batch.context, Tensor(batch.future.shape()), steps), batch.future);
    });
}

namespace {

std::vector<ForecastSampleSet> sample_sets(const Forecaster& model, std::span<const Tensor> contexts, int n,
                                           std::span<const std::uint64_t> example_seeds) {
    if (model.spec().mode != Mode::diffusion) throw std::invalid_argument("sample: regression models emit one trajectory; use regress");
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    for (const auto& c : contexts) check_context(model, c);
    const auto& d = model.spec().denoiser;
    const std::int64_t fut = static_cast<std::int64_t>(kFutureFrames) * d.tokens_per_frame * d.token_dim;

    std::vector<ForecastSampleSet> sets(contexts.size());
    std::vector<const Tensor*> seq_context;
    std::vector<std::uint64_t> seq_seed;
    std::vector<float*> seq_out;
    for (std::size_t e = 0; e < contexts.size(); ++e) {
        const std::uint64_t example_seed = example_seeds[e];
        sets[e] = {Tensor({n, kFutureFrames, d.tokens_per_frame, d.token_dim}), example_seed, model.schedule().steps};
        for (int i = 0; i < n; ++i) {
            seq_context.push_back(&contexts[e]);
            seq_seed.push_back(numkit::mix_seed(example_seed, static_cast<std::uint64_t>(i)));
            seq_out.push_back(sets[e].samples.ptr() + i * fut);
        }
    }
    const auto total = static_cast<std::int64_t>(seq_seed.size());
    const std::int64_t chunks = (total + kSampleChunk - 1) / kSampleChunk;
    numkit::parallel_for(chunks, [&](std::int64_t c) {
        const std::int64_t lo = c * kSampleChunk, hi = std::min(total, lo + kSampleChunk);
        std::vector<float> buffer(static_cast<std::size_t>((hi - lo) * fut));
        run_sampler(model, std::span(seq_context).subspan(lo, hi - lo), std::span(seq_seed).subspan(lo, hi - lo), buffer.data());
        for (std::int64_t i = lo; i < hi; ++i) std::copy_n(buffer.data() + (i - lo) * fut, fut, seq_out[static_cast<std::size_t>(i)]);
    });
    return sets;
}

}  // namespace

ForecastSampleSet sample(const Forecaster& model, const Tensor& context, int n, std::uint64_t seed) {
    const std::vector<std::uint64_t> seeds{seed};
    return std::move(sample_sets(model, std::span(&context, 1), n, seeds).front());
}

std::vector<ForecastSampleSet> sample_many(const Forecaster& model, std::span<const Tensor> contexts, int n,
                                           std::uint64_t seed) {
    std::vector<std::uint64_t> seeds;
    for (std::size_t e = 0; e < contexts.size(); ++e) seeds.push_back(numkit::mix_seed(seed, e));
    return sample_sets(model, contexts, n, seeds);
}

Tensor regress(const Forecaster& model, const Tensor& context) {
    if (model.spec().mode != Mode::regression) throw std::invalid_argument("regress: model is a diffusion forecaster");
    check_context(model, context);
    const auto& d = model.spec().denoiser;
    const std::vector<int> steps{0};
    Graph g;
    Tensor out = model.denoiser()(g, context.reshaped({1, kContextFrames, d.tokens_per_frame, d.token_dim}),
                                  Tensor({1, kFutureFrames, d.tokens_per_frame, d.token_dim}), steps)
                     .value();
    return out.reshaped({kFutureFrames, d.tokens_per_frame, d.token_dim});
}

Tensor frames_of(const Tensor& trajectory, int begin, int end) {
    if (trajectory.rank() < 1 || begin < 0 || end > trajectory.dim(0) || begin > end) {
        throw numkit::ShapeError(fmt::format("frames_of: [{}, {}) of {}", begin, end, numkit::to_string(trajectory.shape())));
    }
    Shape shape = trajectory.shape();
    const std::int64_t per = trajectory.size() / shape[0];
    shape[0] = end - begin;
    Tensor out(shape);
    std::copy_n(trajectory.ptr() + begin * per, (end - begin) * per, out.ptr());
    return out;
}

}  // namespace latentcast::forecaster
