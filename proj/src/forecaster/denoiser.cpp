#include "latentcast/forecaster/denoiser.hpp"

#include <fmt/format.h>

namespace latentcast::forecaster {

using numkit::Shape;

void DenoiserSpec::validate() const {
    auto require = [](bool ok, std::string_view what) {
        if (!ok) throw std::invalid_argument(fmt::format("denoiser spec: {}", what));
    };
    require(token_dim >= 1 && tokens_per_frame >= 1, "token_dim and tokens_per_frame must be positive");
    require(width >= 1 && heads >= 1 && width % heads == 0, "width must be divisible by heads");
    require(depth >= 1 && time_dim >= 2 && time_dim % 2 == 0, "depth must be >= 1 and time_dim even");
    require(max_step >= 1, "max_step must be >= 1");
    require(grid_width >= 1 && tokens_per_frame % grid_width == 0, "grid_width must divide tokens_per_frame");
    require(latent_patch >= 1 && grid_width % latent_patch == 0 && grid_height() % latent_patch == 0,
            "latent_patch must divide both grid dimensions");
}

void to_json(nlohmann::json& j, const DenoiserSpec& s) {
    j = nlohmann::json{{"token_dim", s.token_dim}, {"tokens_per_frame", s.tokens_per_frame},
                       {"grid_width", s.grid_width}, {"latent_patch", s.latent_patch},
                       {"width", s.width},         {"depth", s.depth},
                       {"heads", s.heads},         {"time_dim", s.time_dim},
                       {"max_step", s.max_step},   {"input_skip", s.input_skip}};
}

void from_json(const nlohmann::json& j, DenoiserSpec& s) {
    const DenoiserSpec d;
    s.token_dim = j.value("token_dim", d.token_dim);
    s.tokens_per_frame = j.value("tokens_per_frame", d.tokens_per_frame);
    s.grid_width = j.value("grid_width", d.grid_width);
    s.latent_patch = j.value("latent_patch", d.latent_patch);
    s.width = j.value("width", d.width);
    s.depth = j.value("depth", d.depth);
    s.heads = j.value("heads", d.heads);
    s.time_dim = j.value("time_dim", d.time_dim);
    s.max_step = j.value("max_step", d.max_step);
    s.input_skip = j.value("input_skip", d.input_skip);
    s.validate();
}

Denoiser::Denoiser(DenoiserSpec spec, numkit::Rng& rng, std::span<const double> initial_gain) : spec_(spec) {
    spec_.validate();
    const std::int64_t w = spec_.width, n = spec_.groups_per_frame();
    const std::int64_t frames = kContextFrames + kFutureFrames;
    input_ = numkit::Linear<float>(params_, "input", spec_.group_dim(), w, rng);
    spatial_ = &params_.create("spatial", rng.normal_tensor<float>({n, w}, 0.02));
    frame_ = &params_.create("frame", rng.normal_tensor<float>({frames, w}, 0.02));
    time_in_ = numkit::Linear<float>(params_, "time_in", spec_.time_dim, w, rng);
    time_out_ = numkit::Linear<float>(params_, "time_out", w, w, rng);
    for (int i = 0; i < spec_.depth; ++i) blocks_.emplace_back(params_, fmt::format("block{}", i), w, spec_.heads, rng);
    final_norm_ = numkit::LayerNorm<float>(params_, "final_norm", w);
    // Zero output: the untrained network predicts eps = 0.
    output_ = numkit::Linear<float>(params_, "output", w, spec_.group_dim(), rng, true, 0.0);
    if (spec_.input_skip) {
        Tensor gain({spec_.max_step + 1, spec_.token_dim});
        if (!initial_gain.empty()) {
            if (initial_gain.size() != static_cast<std::size_t>(spec_.max_step + 1)) {
                throw std::invalid_argument("denoiser: initial gain needs max_step + 1 entries");
            }
            for (std::int64_t s = 0; s <= spec_.max_step; ++s) {
                gain.matrix().row(s).setConstant(static_cast<float>(initial_gain[static_cast<std::size_t>(s)]));
            }
        }
        skip_gain_ = &params_.create("skip_gain", std::move(gain));
    }
    for (std::int64_t f = 0; f < frames; ++f) {
        for (std::int64_t i = 0; i < n; ++i) {
            spatial_index_.push_back(i);
            frame_index_.push_back(f);
        }
    }
    // Groups in raster order, tokens within a group in raster order.
    const int p = spec_.latent_patch, gw = spec_.grid_width;
    for (int gy = 0; gy < spec_.grid_height() / p; ++gy) {
        for (int gx = 0; gx < gw / p; ++gx) {
            for (int dy = 0; dy < p; ++dy) {
                for (int dx = 0; dx < p; ++dx) group_order_.push_back((gy * p + dy) * gw + gx * p + dx);
            }
        }
    }
    std::vector<std::int64_t> slot_of(group_order_.size());
    for (std::size_t k = 0; k < group_order_.size(); ++k) slot_of[static_cast<std::size_t>(group_order_[k])] = static_cast<std::int64_t>(k);
    const std::int64_t tokens = spec_.tokens_per_frame;
    for (std::int64_t f = 0; f < kFutureFrames; ++f) {
        for (std::int64_t t = 0; t < tokens; ++t) ungroup_.push_back(f * tokens + slot_of[static_cast<std::size_t>(t)]);
    }
}

Var Denoiser::operator()(Graph& g, const Tensor& context, const Tensor& future, std::span<const int> steps) const {
    const std::int64_t b = static_cast<std::int64_t>(steps.size());
    const std::int64_t n = spec_.tokens_per_frame, d = spec_.token_dim, w = spec_.width;
    const std::int64_t frames = kContextFrames + kFutureFrames;
    for (const int s : steps) {
        if (s < 0 || s > spec_.max_step) throw std::out_of_range(fmt::format("denoiser: step {} outside [0, {}]", s, spec_.max_step));
    }
    const Shape context_shape{b, kContextFrames, n, d};
    const Shape future_shape{b, kFutureFrames, n, d};
    if (context.shape() != context_shape) throw numkit::ShapeError("denoiser context", context.shape(), context_shape);
    if (future.shape() != future_shape) throw numkit::ShapeError("denoiser future", future.shape(), future_shape);

    const std::int64_t len = spec_.sequence_length();
    // Token rows regrouped so each merged position is a contiguous run of rows.
    Tensor seq({b, len, spec_.group_dim()});
    for (std::int64_t i = 0; i < b; ++i) {
        for (std::int64_t f = 0; f < frames; ++f) {
            const float* src = f < kContextFrames ? context.ptr() + ((i * kContextFrames + f) * n) * d
                                                  : future.ptr() + ((i * kFutureFrames + f - kContextFrames) * n) * d;
            float* dst = seq.ptr() + ((i * frames + f) * n) * d;
            for (std::int64_t k = 0; k < n; ++k) std::copy_n(src + group_order_[static_cast<std::size_t>(k)] * d, d, dst + k * d);
        }
    }
    Var x = input_(g.constant(std::move(seq)));
    const Var position = numkit::add(numkit::embedding(g.parameter(*spatial_), spatial_index_),
                                     numkit::embedding(g.parameter(*frame_), frame_index_));
    x = numkit::add(x, position);

    std::vector<double> when(steps.begin(), steps.end());
    const Var t = time_out_(numkit::gelu(time_in_(g.constant(numkit::sinusoidal_embedding<float>(when, spec_.time_dim)))));
    std::vector<std::int64_t> broadcast;
    broadcast.reserve(static_cast<std::size_t>(b * len));
    for (std::int64_t i = 0; i < b; ++i) broadcast.insert(broadcast.end(), static_cast<std::size_t>(len), i);
    x = numkit::add(x, numkit::reshape(numkit::embedding(t, broadcast), Shape{b, len, w}));

    for (const auto& block : blocks_) x = block(x);
    x = numkit::slice_rows(x, kContextFrames * spec_.groups_per_frame(), len);
    x = numkit::reshape(output_(final_norm_(x)), Shape{b * kFutureFrames * n, d});
    std::vector<std::int64_t> rows;
    rows.reserve(static_cast<std::size_t>(b * kFutureFrames * n));
    for (std::int64_t i = 0; i < b; ++i) {
        for (const auto r : ungroup_) rows.push_back(i * kFutureFrames * n + r);
    }
    if (skip_gain_ == nullptr) return numkit::reshape(numkit::embedding(x, rows), future_shape);
    std::vector<std::int64_t> row_steps;
    row_steps.reserve(rows.size());
    for (std::int64_t i = 0; i < b; ++i) row_steps.insert(row_steps.end(), static_cast<std::size_t>(kFutureFrames * n), steps[static_cast<std::size_t>(i)]);
    const Var skip = numkit::mul(numkit::embedding(g.parameter(*skip_gain_), row_steps),
                                 g.constant(future.reshaped({b * kFutureFrames * n, d})));
    return numkit::reshape(numkit::add(numkit::embedding(x, rows), skip), future_shape);
}

}  // namespace latentcast::forecaster
