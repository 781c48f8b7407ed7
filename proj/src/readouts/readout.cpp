#include "latentcast/readouts/readout.hpp"

#include "latentcast/numkit/io.hpp"
#include "latentcast/numkit/optim.hpp"

#include <Eigen/Cholesky>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>

namespace latentcast::readouts {

namespace {

using numkit::Shape;

constexpr std::array<std::pair<Task, std::string_view>, 4> kTaskNames{{
    {Task::pixels, "pixels"},
    {Task::depth, "depth"},
    {Task::points, "points"},
    {Task::boxes, "boxes"},
}};

constexpr int kFourierBands = 6;

bool is_dense(Task t) { return t == Task::pixels || t == Task::depth; }

int query_coords(Task t) { return t == Task::points ? 2 : t == Task::boxes ? 4 : 0; }

int channels(Task t) { return t == Task::pixels ? 3 : 1; }

// Per coordinate: u in [-1, 1] plus sin/cos at octave frequencies.
Tensor fourier_features(const Tensor& coords, double extent) {
    const std::int64_t rows = coords.rows(), c = coords.cols();
    const std::int64_t per = 1 + 2 * kFourierBands;
    Tensor out({rows, c * per});
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < c; ++j) {
            const double u = 2.0 * coords[r * c + j] / extent - 1.0;
            float* dst = out.ptr() + r * c * per + j * per;
            dst[0] = static_cast<float>(u);
            for (int k = 0; k < kFourierBands; ++k) {
                const double a = std::numbers::pi * std::ldexp(u, k);
                dst[1 + 2 * k] = static_cast<float>(std::sin(a));
                dst[2 + 2 * k] = static_cast<float>(std::cos(a));
            }
        }
    }
    return out;
}

double inverse_softplus(double y) { return y > 20.0 ? y : std::log(std::expm1(std::max(y, 1e-6))); }

// Copies frames `times` of a [T, ...] tensor into a new [times.size(), ...] tensor.
Tensor gather_frames(const Tensor& t, std::span<const int> times) {
    Shape shape = t.shape();
    const std::int64_t per = t.size() / shape[0];
    shape[0] = static_cast<std::int64_t>(times.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < times.size(); ++i) {
        std::copy_n(t.ptr() + times[i] * per, per, out.ptr() + static_cast<std::int64_t>(i) * per);
    }
    return out;
}

constexpr std::int64_t kRidgeRows = 16384;
constexpr double kRidge = 1e-4;

}  // namespace

// Dense heads start from the ridge-regression probe: patch_skip holds the
// weights and patch_out's bias the intercept, with patch_out zero-initialized.
void fit_linear_skip(ReadoutHead& head, std::span<const Tensor> latents, std::span<const Tensor> targets) {
    const std::int64_t d = head.geometry_.token_dim;
    const std::int64_t out = targets.front().cols();
    std::int64_t total = 0;
    for (const auto& l : latents) total += l.rows();
    const std::int64_t stride = std::max<std::int64_t>(1, (total + kRidgeRows - 1) / kRidgeRows);
    numkit::RowMatrix<double> gram = numkit::RowMatrix<double>::Zero(d + 1, d + 1);
    numkit::RowMatrix<double> cross = numkit::RowMatrix<double>::Zero(d + 1, out);
    std::int64_t index = 0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const Tensor z = head.standardize(latents[i]);
        std::vector<std::int64_t> picked;
        for (std::int64_t r = 0; r < z.rows(); ++r, ++index) {
            if (index % stride == 0) picked.push_back(r);
        }
        numkit::RowMatrix<double> x(static_cast<Eigen::Index>(picked.size()), d + 1);
        numkit::RowMatrix<double> y(static_cast<Eigen::Index>(picked.size()), out);
        for (std::size_t k = 0; k < picked.size(); ++k) {
            x.row(static_cast<Eigen::Index>(k)).head(d) = z.matrix().row(picked[k]).cast<double>();
            x(static_cast<Eigen::Index>(k), d) = 1.0;
            y.row(static_cast<Eigen::Index>(k)) = targets[i].matrix().row(picked[k]).cast<double>();
        }
        gram.noalias() += x.transpose() * x;
        cross.noalias() += x.transpose() * y;
    }
    const double rows = gram(d, d);
    gram.diagonal().head(d).array() += kRidge * rows;
    const numkit::RowMatrix<double> solution = gram.ldlt().solve(cross);
    head.patch_skip_.weight->value.matrix() = solution.topRows(d).cast<float>();
    head.patch_out_.bias->value.matrix() = solution.row(d).cast<float>();
}

std::string_view to_string(Task task) {
    for (const auto& [t, name] : kTaskNames) {
        if (t == task) return name;
    }
    return "pixels";
}

Task parse_task(std::string_view name) {
    for (const auto& [t, n] : kTaskNames) {
        if (n == name) return t;
    }
    throw std::invalid_argument(fmt::format("unknown readout task '{}'", name));
}

void ReadoutSpec::validate() const {
    auto require = [](bool ok, std::string_view what) {
        if (!ok) throw std::invalid_argument(fmt::format("readout spec: {}", what));
    };
    require(width >= 1 && heads >= 1 && width % heads == 0, "width must be divisible by heads");
    require(steps >= 0 && batch >= 1 && learning_rate > 0.0, "invalid training budget");
    require(frames_per_clip >= 1 && frames_per_clip <= synthworld::kClipFrames, "frames_per_clip must lie in [1, 16]");
}

void to_json(nlohmann::json& j, const ReadoutSpec& s) {
    j = nlohmann::json{{"task", to_string(s.task)},
                       {"width", s.width},
                       {"heads", s.heads},
                       {"steps", s.steps},
                       {"batch", s.batch},
                       {"frames_per_clip", s.frames_per_clip},
                       {"learning_rate", s.learning_rate},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, ReadoutSpec& s) {
    const ReadoutSpec d;
    s.task = parse_task(j.value("task", std::string(to_string(d.task))));
    s.width = j.value("width", d.width);
    s.heads = j.value("heads", d.heads);
    s.steps = j.value("steps", d.steps);
    s.batch = j.value("batch", d.batch);
    s.frames_per_clip = j.value("frames_per_clip", d.frames_per_clip);
    s.learning_rate = j.value("learning_rate", d.learning_rate);
    s.seed = j.value("seed", d.seed);
    s.validate();
}

Tensor task_queries(const synthworld::Clip& clip, Task task) {
    if (is_dense(task)) return Tensor({0});
    const Tensor& src = task == Task::points ? clip.tracks : clip.boxes;
    const std::int64_t rows = src.dim(0), frames = src.dim(1), stride = src.dim(2);
    const int c = query_coords(task);
    Tensor out({rows, c});
    for (std::int64_t r = 0; r < rows; ++r) std::copy_n(src.ptr() + r * frames * stride, c, out.ptr() + r * c);
    return out;
}

Tensor task_target(const synthworld::Clip& clip, Task task) {
    switch (task) {
        case Task::pixels: return clip.rgb;
        case Task::depth: return clip.depth;
        case Task::points: return clip.tracks;
        case Task::boxes: return clip.boxes;
    }
    throw std::invalid_argument("task_target: bad task");
}

// One training or decoding batch: B clips with F frames each, frame-major
// within a clip.
struct ReadoutHead::Batch {
    std::int64_t clips = 0;
    std::int64_t frames = 0;
    Tensor tokens;          // [B*F, N, D] standardized
    Tensor anchor_tokens;   // [B, N, D] standardized frame-1 tokens (points, boxes)
    std::vector<std::int64_t> times;  // B*F absolute frame indices
    Tensor queries;         // [B, R, coords] frame-1 conditioning in pixels
    Tensor target;          // dense: [B*F, N, P]; points: [B*F, R, 3]; boxes: [B*F, R, 5]
};

ReadoutHead::ReadoutHead(ReadoutSpec spec, ReadoutGeometry geometry) : spec_(std::move(spec)), geometry_(geometry) {
    spec_.validate();
    if (geometry_.patch < 1 || geometry_.height % geometry_.patch != 0 || geometry_.width % geometry_.patch != 0) {
        throw std::invalid_argument("readout geometry: image is not divisible by the patch size");
    }
    numkit::Rng rng(numkit::mix_seed(spec_.seed, 0x4EAD0 + static_cast<std::uint64_t>(spec_.task)));
    const std::int64_t d = geometry_.token_dim, w = spec_.width, n = geometry_.tokens();
    input_mean_ = &params_.create("input_mean", Tensor({d}));
    input_std_ = &params_.create("input_std", Tensor({d}, 1.0f));
    input_ = numkit::Linear<float>(params_, "input", d, w, rng);
    context_position_ = &params_.create("context_position", rng.normal_tensor<float>({n, w}, 0.02));
    if (is_dense(spec_.task)) {
        const std::int64_t out = static_cast<std::int64_t>(geometry_.patch) * geometry_.patch * channels(spec_.task);
        query_position_ = &params_.create("query_position", rng.normal_tensor<float>({n, w}, 0.02));
        dense_block_ = numkit::CrossAttentionBlock<float>(params_, "dense", w, spec_.heads, rng);
        patch_out_ = numkit::Linear<float>(params_, "patch_out", w, out, rng, true, 0.0);
        patch_skip_ = numkit::Linear<float>(params_, "patch_skip", d, out, rng, false, 0.1);
    } else {
        const std::int64_t features = query_coords(spec_.task) * (1 + 2 * kFourierBands);
        query_embed_ = numkit::Linear<float>(params_, "query_embed", features, w, rng);
        time_embedding_ = &params_.create("time_embedding", rng.normal_tensor<float>({synthworld::kClipFrames, w}, 0.02));
        anchor_block_ = numkit::CrossAttentionBlock<float>(params_, "anchor", w, spec_.heads, rng);
        frame_block_ = numkit::CrossAttentionBlock<float>(params_, "frame", w, spec_.heads, rng);
        track_out_ = numkit::Linear<float>(params_, "track_out", w, 4, rng, true, 0.0);
    }
}

std::string ReadoutHead::checksum() const { return numkit::checksum(params_); }

Tensor ReadoutHead::standardize(const Tensor& tokens) const {
    if (tokens.cols() != geometry_.token_dim) {
        throw numkit::ShapeError("readout: token dim", tokens.shape(), Shape{geometry_.token_dim});
    }
    Tensor out(tokens.shape());
    out.matrix().array() = (tokens.matrix().array().rowwise() - input_mean_->value.matrix().row(0).array()).rowwise() /
                           input_std_->value.matrix().row(0).array();
    return out;
}

Var ReadoutHead::context(Graph& g, const Tensor& standardized) const {
    return numkit::add(input_(g.constant(standardized)), g.parameter(*context_position_));
}

Var ReadoutHead::forward(Graph& g, const Batch& b) const {
    const std::int64_t w = spec_.width;
    const Var ctx = context(g, b.tokens);
    if (is_dense(spec_.task)) {
        const Var q = numkit::add(ctx, g.parameter(*query_position_));
        const Var h = dense_block_(q, ctx);
        return numkit::add(patch_out_(h), patch_skip_(g.constant(b.tokens)));
    }
    const std::int64_t rows = b.queries.dim(1);
    const Var anchor_ctx = context(g, b.anchor_tokens);
    const Tensor features =
        fourier_features(b.queries.reshaped({b.clips * rows, b.queries.dim(2)}), geometry_.width)
            .reshaped({b.clips, rows, (1 + 2 * kFourierBands) * b.queries.dim(2)});
    Var q = anchor_block_(query_embed_(g.constant(features)), anchor_ctx);
    q = numkit::reshape(q, Shape{b.clips * rows, w});

    std::vector<std::int64_t> tile, when;
    tile.reserve(static_cast<std::size_t>(b.clips * b.frames * rows));
    for (std::int64_t c = 0; c < b.clips; ++c) {
        for (std::int64_t f = 0; f < b.frames; ++f) {
            for (std::int64_t r = 0; r < rows; ++r) {
                tile.push_back(c * rows + r);
                when.push_back(b.times[static_cast<std::size_t>(c * b.frames + f)]);
            }
        }
    }
    Var per_frame = numkit::add(numkit::embedding(q, tile), numkit::embedding(g.parameter(*time_embedding_), when));
    per_frame = numkit::reshape(per_frame, Shape{b.clips * b.frames, rows, w});
    return track_out_(frame_block_(per_frame, ctx));
}

std::vector<Var> ReadoutHead::geometry(Var raw, const Batch& b) const {
    Graph& g = raw.graph();
    const std::int64_t rows = b.queries.dim(1), coords = b.queries.dim(2);
    const auto reach = static_cast<float>(geometry_.width) / 2.0f;
    // Frame-1 anchors tiled over frames.
    auto tiled = [&](auto&& value_of, std::int64_t cols) {
        Tensor t({b.clips * b.frames, rows, cols});
        for (std::int64_t c = 0; c < b.clips; ++c) {
            for (std::int64_t f = 0; f < b.frames; ++f) {
                for (std::int64_t r = 0; r < rows; ++r) {
                    const float* q = b.queries.ptr() + (c * rows + r) * coords;
                    for (std::int64_t j = 0; j < cols; ++j) {
                        t[((c * b.frames + f) * rows + r) * cols + j] = value_of(q, j);
                    }
                }
            }
        }
        return g.constant(std::move(t));
    };
    if (spec_.task == Task::points) {
        const Var start = tiled([](const float* q, std::int64_t j) { return q[j]; }, 2);
        return {numkit::add(start, numkit::scale(numkit::slice_cols(raw, 0, 2), reach))};
    }
    const Var centre =
        tiled([](const float* q, std::int64_t j) { return 0.5f * (q[j] + q[j + 2]); }, 2);
    const Var size_offset = tiled(
        [reach](const float* q, std::int64_t j) {
            return static_cast<float>(inverse_softplus((q[j + 2] - q[j]) / reach));
        },
        2);
    const Var c = numkit::add(centre, numkit::scale(numkit::slice_cols(raw, 0, 2), reach));
    const Var half = numkit::scale(numkit::softplus(numkit::add(numkit::slice_cols(raw, 2, 4), size_offset)), 0.5f * reach);
    const Var lo = numkit::sub(c, half);
    const Var hi = numkit::add(c, half);
    return {numkit::slice_cols(lo, 0, 1), numkit::slice_cols(lo, 1, 2), numkit::slice_cols(hi, 0, 1),
            numkit::slice_cols(hi, 1, 2)};
}

Var ReadoutHead::loss(Graph& g, const Batch& b) const {
    const Var raw = forward(g, b);
    if (is_dense(spec_.task)) return numkit::mse(raw, b.target);

    const std::int64_t cells = b.target.rows();
    const std::int64_t stride = b.target.cols();
    auto column = [&](std::int64_t j) {
        Tensor t({b.target.dim(0), b.target.dim(1), 1});
        for (std::int64_t i = 0; i < cells; ++i) t[i] = b.target[i * stride + j];
        return t;
    };
    if (spec_.task == Task::points) {
        const Var pos = geometry(raw, b).front();
        Tensor gt_xy({b.target.dim(0), b.target.dim(1), 2});
        Tensor visible2(gt_xy.shape());
        Tensor uncertain({b.target.dim(0), b.target.dim(1), 1});
        double visible_count = 0.0;
        for (std::int64_t i = 0; i < cells; ++i) {
            const float* t = b.target.ptr() + i * stride;
            gt_xy[2 * i] = t[0];
            gt_xy[2 * i + 1] = t[1];
            visible2[2 * i] = visible2[2 * i + 1] = t[2];
            visible_count += t[2];
            const double err = std::hypot(pos.value()[2 * i] - t[0], pos.value()[2 * i + 1] - t[1]);
            uncertain[i] = err > kUncertaintyThresholdPx ? 1.0f : 0.0f;
        }
        const Var huber = numkit::huber(numkit::sub(pos, g.constant(gt_xy)), static_cast<float>(kHuberDeltaPx));
        const Var position = numkit::scale(numkit::sum(numkit::mul(huber, g.constant(visible2))),
                                           static_cast<float>(1.0 / std::max(1.0, 2.0 * visible_count)));
        const Var visibility = numkit::mean(numkit::bce_with_logits(numkit::slice_cols(raw, 2, 3), column(2)));
        const Var uncertainty = numkit::mean(numkit::bce_with_logits(numkit::slice_cols(raw, 3, 4), uncertain));
        return numkit::add(position, numkit::add(numkit::scale(visibility, static_cast<float>(kVisibilityWeight)),
                                                 numkit::scale(uncertainty, static_cast<float>(kUncertaintyWeight))));
    }
    // Boxes: squared corner error in image-width units over present frames.
    const Tensor present = column(4);
    const double count = std::max(1.0, static_cast<double>(present.array().sum()));
    const auto corners = geometry(raw, b);
    const auto inv_extent = 1.0f / static_cast<float>(geometry_.width);
    Var total;
    for (std::int64_t j = 0; j < 4; ++j) {
        const Var e = numkit::scale(numkit::sub(corners[static_cast<std::size_t>(j)], g.constant(column(j))), inv_extent);
        const Var term = numkit::sum(numkit::mul(numkit::mul(e, e), g.constant(present)));
        total = total.valid() ? numkit::add(total, term) : term;
    }
    return numkit::scale(total, static_cast<float>(1.0 / count));
}

TaskOutput ReadoutHead::decode(const Tensor& latents, const Tensor& queries) const {
    if (!trained_) throw std::logic_error(fmt::format("readout {}: decode before training", to_string(spec_.task)));
    if (latents.rank() != 3 || latents.dim(1) != geometry_.tokens()) {
        throw numkit::ShapeError("readout.decode", latents.shape(), Shape{-1, geometry_.tokens(), geometry_.token_dim});
    }
    const std::int64_t frames = latents.dim(0);
    if (frames > synthworld::kClipFrames) throw numkit::ShapeError("readout.decode: too many frames " + numkit::to_string(latents.shape()));
    Batch b;
    b.clips = 1;
    b.frames = frames;
    b.tokens = standardize(latents);
    for (std::int64_t f = 0; f < frames; ++f) b.times.push_back(f);

    Graph g;
    const int h = geometry_.height, w = geometry_.width, p = geometry_.patch;
    if (spec_.task == Task::pixels) {
        Tensor rgb = backbones::unpatchify(forward(g, b).value(), p, h, w, 3);
        rgb.array() = rgb.array().max(0.0f).min(1.0f);
        return {spec_.task, std::move(rgb)};
    }
    if (spec_.task == Task::depth) {
        Tensor depth = backbones::unpatchify(forward(g, b).value(), p, h, w, 1);
        depth.array() = (depth.array() * static_cast<float>(geometry_.depth_scale)).max(1e-3f);
        return {spec_.task, depth.reshaped({frames, h, w})};
    }

    const int coords = query_coords(spec_.task);
    if (queries.rank() != 2 || queries.cols() != coords) {
        throw numkit::ShapeError("readout.decode queries", queries.shape(), Shape{-1, coords});
    }
    const std::int64_t rows = queries.dim(0);
    b.anchor_tokens = gather_frames(b.tokens, std::array{0});
    b.queries = queries.reshaped({1, rows, coords});
    const Var raw = forward(g, b);
    const auto geo = geometry(raw, b);
    // [F, R, 4] -> [R, F, 4]
    Tensor out({rows, frames, 4});
    for (std::int64_t f = 0; f < frames; ++f) {
        for (std::int64_t r = 0; r < rows; ++r) {
            float* dst = out.ptr() + (r * frames + f) * 4;
            const std::int64_t cell = f * rows + r;
            if (spec_.task == Task::points) {
                dst[0] = geo[0].value()[2 * cell];
                dst[1] = geo[0].value()[2 * cell + 1];
                dst[2] = raw.value()[4 * cell + 2];
                dst[3] = raw.value()[4 * cell + 3];
            } else {
                for (int j = 0; j < 4; ++j) dst[j] = geo[static_cast<std::size_t>(j)].value()[cell];
            }
        }
    }
    return {spec_.task, std::move(out)};
}

void ReadoutHead::save(const std::filesystem::path& dir) const {
    const nlohmann::json geometry{{"token_dim", geometry_.token_dim},
                                  {"patch", geometry_.patch},
                                  {"height", geometry_.height},
                                  {"width", geometry_.width},
                                  {"depth_scale", geometry_.depth_scale}};
    numkit::save_checkpoint(dir, params_,
                            {{"kind", "readout"}, {"spec", spec_}, {"geometry", geometry}, {"trained", trained_}});
}

ReadoutHead ReadoutHead::load(const std::filesystem::path& dir) {
    const auto meta = numkit::read_checkpoint_meta(dir);
    if (meta.value("kind", "") != "readout") throw numkit::FormatError(dir.string() + ": not a readout checkpoint");
    const auto& geo = meta.at("geometry");
    ReadoutGeometry geometry{geo.at("token_dim").get<int>(), geo.at("patch").get<int>(), geo.at("height").get<int>(),
                             geo.at("width").get<int>(), geo.at("depth_scale").get<double>()};
    ReadoutHead head(meta.at("spec").get<ReadoutSpec>(), geometry);
    numkit::load_checkpoint(dir, head.params_);
    head.trained_ = meta.value("trained", false);
    return head;
}

ReadoutReport train_readout(ReadoutHead& head, const synthworld::Dataset& data, std::span<const Tensor> latents) {
    const ReadoutSpec& spec = head.spec_;
    const std::string name(to_string(spec.task));
    if (head.trained_) throw std::logic_error(fmt::format("train_readout({}): head is frozen", name));
    if (data.split != synthworld::Split::readout_train) {
        throw std::invalid_argument(fmt::format("train_readout({}): expected the readout-train split, got {}", name,
                                                synthworld::to_string(data.split)));
    }
    if (data.clips.empty() || latents.size() != data.clips.size()) {
        throw std::invalid_argument(fmt::format("train_readout({}): {} clips but {} latent trajectories", name,
                                                data.clips.size(), latents.size()));
    }
    const auto& geo = head.geometry_;
    const std::int64_t d = geo.token_dim, n = geo.tokens();
    for (const auto& l : latents) {
        if (l.shape() != Shape{synthworld::kClipFrames, n, d}) {
            throw numkit::ShapeError("train_readout latents", l.shape(), Shape{synthworld::kClipFrames, n, d});
        }
    }

    // Input standardization from the training latents.
    {
        Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(d), sq = Eigen::ArrayXd::Zero(d);
        double rows = 0.0;
        for (const auto& l : latents) {
            const auto m = l.matrix().cast<double>();
            sum += m.colwise().sum().transpose().array();
            sq += m.array().square().colwise().sum().transpose();
            rows += static_cast<double>(m.rows());
        }
        const Eigen::ArrayXd mean = sum / rows;
        const Eigen::ArrayXd var = (sq / rows - mean.square()).max(1e-6);
        head.input_mean_->value.array() = mean.cast<float>();
        head.input_std_->value.array() = var.sqrt().cast<float>();
    }

    const bool dense = is_dense(spec.task);
    const int p = geo.patch;
    // Dense targets per clip, already patchified: [T, N, P].
    std::vector<Tensor> targets;
    targets.reserve(data.clips.size());
    for (const auto& clip : data.clips) {
        if (spec.task == Task::pixels) {
            targets.push_back(backbones::patchify(clip.rgb, p));
        } else if (spec.task == Task::depth) {
            Tensor scaled = clip.depth.reshaped({clip.depth.dim(0), clip.depth.dim(1), clip.depth.dim(2), 1});
            scaled.array() /= static_cast<float>(geo.depth_scale);
            targets.push_back(backbones::patchify(scaled, p));
        } else {
            targets.push_back(task_target(clip, spec.task));
        }
    }

    if (dense) fit_linear_skip(head, latents, targets);

    numkit::Rng rng(numkit::mix_seed(spec.seed, 0x7EAD));
    numkit::OptimizerState opt;
    opt.config.clip_norm = 1.0;
    ReadoutReport report;
    const std::int64_t frames = dense ? spec.frames_per_clip : synthworld::kClipFrames;
    for (int step = 0; step < spec.steps; ++step) {
        opt.config.learning_rate = numkit::warmup_cosine(spec.learning_rate, step, spec.steps, spec.steps / 20);
        ReadoutHead::Batch b;
        b.clips = spec.batch;
        b.frames = frames;
        std::vector<Tensor> token_parts, anchor_parts, query_parts, target_parts;
        for (int c = 0; c < spec.batch; ++c) {
            const auto i = static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(data.clips.size())));
            std::vector<int> times(static_cast<std::size_t>(frames));
            for (std::int64_t f = 0; f < frames; ++f) {
                times[static_cast<std::size_t>(f)] =
                    dense ? static_cast<int>(rng.below(synthworld::kClipFrames)) : static_cast<int>(f);
                b.times.push_back(times[static_cast<std::size_t>(f)]);
            }
            token_parts.push_back(gather_frames(latents[i], times));
            if (dense) {
                target_parts.push_back(gather_frames(targets[i], times));
            } else {
                anchor_parts.push_back(gather_frames(latents[i], std::array{0}));
                query_parts.push_back(task_queries(data.clips[i], spec.task));
                // [R, T, C] -> [T, R, C]
                const Tensor& t = targets[i];
                const std::int64_t rows = t.dim(0), cols = t.dim(2);
                Tensor swapped({frames, rows, cols});
                for (std::int64_t r = 0; r < rows; ++r) {
                    for (std::int64_t f = 0; f < frames; ++f) {
                        std::copy_n(t.ptr() + (r * frames + f) * cols, cols, swapped.ptr() + (f * rows + r) * cols);
                    }
                }
                target_parts.push_back(std::move(swapped));
            }
        }
        auto stack = [](const std::vector<Tensor>& parts) {
            Shape shape = parts.front().shape();
            const std::int64_t per = parts.front().size();
            shape[0] *= static_cast<std::int64_t>(parts.size());
            Tensor out(shape);
            for (std::size_t k = 0; k < parts.size(); ++k) {
                if (parts[k].size() != per) throw numkit::ShapeError("train_readout: ragged batch", parts[k].shape(), parts.front().shape());
                std::copy_n(parts[k].ptr(), per, out.ptr() + static_cast<std::int64_t>(k) * per);
            }
            return out;
        };
        b.tokens = head.standardize(stack(token_parts));
        b.target = stack(target_parts);
        if (!dense) {
            b.anchor_tokens = head.standardize(stack(anchor_parts));
            const Tensor q = stack(query_parts);
            b.queries = q.reshaped({spec.batch, q.dim(0) / spec.batch, q.dim(1)});
        }

        Graph g;
        const Var loss = head.loss(g, b);
        const double value = loss.value().item();
        if (!std::isfinite(value)) {
            throw numkit::TrainingDiverged(fmt::format("train_readout({}): loss {} at step {} (lr {:.3g})", name, value, step,
                                                       opt.config.learning_rate));
        }
        report.losses.push_back(value);
        head.params_.zero_grad();
        g.backward(loss);
        numkit::adam_step(opt, head.params_);
        if (step % 200 == 0 || step + 1 == spec.steps) spdlog::debug("readout {} step {} loss {:.5f}", name, step, value);
    }
    head.trained_ = true;
    return report;
}

}  // namespace latentcast::readouts
