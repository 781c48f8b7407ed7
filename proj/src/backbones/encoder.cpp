#include "latentcast/backbones/encoder.hpp"

#include "latentcast/numkit/io.hpp"

#include <Eigen/QR>
#include <fmt/format.h>

#include <numeric>

namespace latentcast::backbones {

namespace {

using numkit::Shape;

constexpr std::array<std::pair<Variant, std::string_view>, 4> kVariantNames{{
    {Variant::random_frozen, "random-frozen"},
    {Variant::pixel_identity, "pixel-identity"},
    {Variant::image_mae, "image-mae"},
    {Variant::video_mae, "video-mae"},
}};

Tensor orthogonal(std::int64_t n, numkit::Rng& rng) {
    const auto gaussian = rng.normal_tensor<double>({n, n});
    Eigen::HouseholderQR<numkit::RowMatrix<double>> qr(gaussian.matrix());
    numkit::RowMatrix<double> q = qr.householderQ();
    // Fix column signs so the factor is unique for a given draw.
    const auto r = qr.matrixQR().diagonal();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        if (r(j) < 0) q.col(j) *= -1.0;
    }
    numkit::TensorD out({n, n});
    out.matrix() = q;
    return out.cast<float>();
}

}  // namespace

std::string_view to_string(Variant v) {
    for (const auto& [variant, name] : kVariantNames) {
        if (variant == v) return name;
    }
    return "video-mae";
}

Variant parse_variant(std::string_view name) {
    for (const auto& [variant, n] : kVariantNames) {
        if (n == name) return variant;
    }
    throw std::invalid_argument(fmt::format("unknown encoder variant '{}'", name));
}

void EncoderSpec::validate() const {
    auto require = [](bool ok, std::string_view what) {
        if (!ok) throw std::invalid_argument(fmt::format("encoder spec: {}", what));
    };
    require(patch >= 1 && image_height % patch == 0 && image_width % patch == 0,
            "image height and width must be divisible by the patch size");
    require(dim >= 1 && heads >= 1 && dim % heads == 0, "dim must be divisible by heads");
    require(depth >= 0 && decoder_depth >= 1, "depth must be >= 0 and decoder_depth >= 1");
    require(mask_ratio >= 0.0 && mask_ratio < 1.0, "mask_ratio must lie in [0, 1)");
    require(window >= 1 && window <= synthworld::kClipFrames, "window must lie in [1, 16]");
    require(pretrain_steps >= 0 && batch >= 1 && learning_rate > 0.0, "invalid pretraining budget");
}

void to_json(nlohmann::json& j, const EncoderSpec& s) {
    j = nlohmann::json{{"variant", to_string(s.variant)},
                       {"image_height", s.image_height},
                       {"image_width", s.image_width},
                       {"patch", s.patch},
                       {"dim", s.dim},
                       {"depth", s.depth},
                       {"heads", s.heads},
                       {"mask_ratio", s.mask_ratio},
                       {"window", s.window},
                       {"decoder_depth", s.decoder_depth},
                       {"pretrain_steps", s.pretrain_steps},
                       {"batch", s.batch},
                       {"learning_rate", s.learning_rate},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, EncoderSpec& s) {
    const EncoderSpec d;
    s.variant = parse_variant(j.value("variant", std::string(to_string(d.variant))));
    s.image_height = j.value("image_height", d.image_height);
    s.image_width = j.value("image_width", d.image_width);
    s.patch = j.value("patch", d.patch);
    s.dim = j.value("dim", d.dim);
    s.depth = j.value("depth", d.depth);
    s.heads = j.value("heads", d.heads);
    s.mask_ratio = j.value("mask_ratio", d.mask_ratio);
    s.window = j.value("window", d.window);
    s.decoder_depth = j.value("decoder_depth", d.decoder_depth);
    s.pretrain_steps = j.value("pretrain_steps", d.pretrain_steps);
    s.batch = j.value("batch", d.batch);
    s.learning_rate = j.value("learning_rate", d.learning_rate);
    s.seed = j.value("seed", d.seed);
    s.validate();
}

Tensor patchify(const Tensor& frames, int patch) {
    if (frames.rank() != 4) throw numkit::ShapeError("patchify: expected [F, H, W, C], got " + numkit::to_string(frames.shape()));
    const std::int64_t f = frames.dim(0), h = frames.dim(1), w = frames.dim(2), c = frames.dim(3);
    if (h % patch != 0 || w % patch != 0) {
        throw numkit::ShapeError(fmt::format("patchify: {}x{} frame is not divisible by patch {}", h, w, patch));
    }
    const std::int64_t gh = h / patch, gw = w / patch, pd = patch * patch * c;
    Tensor out({f, gh * gw, pd});
    for (std::int64_t t = 0; t < f; ++t) {
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                const std::int64_t token = (y / patch) * gw + x / patch;
                const std::int64_t inner = ((y % patch) * patch + x % patch) * c;
                const float* src = frames.ptr() + ((t * h + y) * w + x) * c;
                float* dst = out.ptr() + (t * gh * gw + token) * pd + inner;
                std::copy(src, src + c, dst);
            }
        }
    }
    return out;
}

Tensor unpatchify(const Tensor& patches, int patch, int height, int width, int channels) {
    const std::int64_t f = patches.dim(0), gw = width / patch, pd = patch * patch * channels;
    const Shape expected{f, static_cast<std::int64_t>(height / patch) * gw, pd};
    if (patches.shape() != expected) throw numkit::ShapeError("unpatchify", patches.shape(), expected);
    Tensor out({f, height, width, channels});
    for (std::int64_t t = 0; t < f; ++t) {
        for (std::int64_t y = 0; y < height; ++y) {
            for (std::int64_t x = 0; x < width; ++x) {
                const std::int64_t token = (y / patch) * gw + x / patch;
                const std::int64_t inner = ((y % patch) * patch + x % patch) * channels;
                const float* src = patches.ptr() + (t * expected[1] + token) * pd + inner;
                std::copy(src, src + channels, out.ptr() + ((t * height + y) * width + x) * channels);
            }
        }
    }
    return out;
}

Encoder::Encoder(EncoderSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    numkit::Rng rng(numkit::mix_seed(spec_.seed, 0xE2C0));
    const std::int64_t d = spec_.dim;
    if (spec_.variant == Variant::pixel_identity) {
        projection_ = &params_.create("projection", orthogonal(spec_.patch_dim(), rng));
        return;
    }
    embed_ = numkit::Linear<float>(params_, "embed", spec_.patch_dim(), d, rng);
    spatial_ = &params_.create("spatial", rng.normal_tensor<float>({spec_.tokens(), d}, 0.02));
    if (spec_.variant == Variant::video_mae) {
        temporal_ = &params_.create("temporal", rng.normal_tensor<float>({synthworld::kClipFrames, d}, 0.02));
    } else {
        std::vector<double> times(synthworld::kClipFrames);
        std::iota(times.begin(), times.end(), 0.0);
        output_temporal_ = numkit::sinusoidal_embedding<float>(times, d, 100.0);
    }
    for (int i = 0; i < spec_.depth; ++i) {
        blocks_.emplace_back(params_, fmt::format("block{}", i), d, spec_.heads, rng);
    }
    final_norm_ = numkit::LayerNorm<float>(params_, "final_norm", d);
}

std::string Encoder::checksum() const { return numkit::checksum(params_); }

Var Encoder::trunk(Graph& g, const Tensor& patches, std::span<const std::int64_t> positions,
                   std::span<const int> times) const {
    const auto frames = static_cast<std::int64_t>(times.size());
    const std::int64_t n = frames == 0 ? 0 : static_cast<std::int64_t>(positions.size()) / frames;
    const Shape expected{frames, n, spec_.patch_dim()};
    if (patches.shape() != expected || n * frames != static_cast<std::int64_t>(positions.size())) {
        throw numkit::ShapeError("encoder.trunk", patches.shape(), expected);
    }
    auto x = g.constant(patches);
    if (spec_.variant == Variant::pixel_identity) return numkit::matmul(x, g.parameter(*projection_));
    x = embed_(x);
    std::vector<std::int64_t> time_index;
    time_index.reserve(positions.size());
    for (std::int64_t f = 0; f < frames; ++f) {
        time_index.insert(time_index.end(), static_cast<std::size_t>(n), times[static_cast<std::size_t>(f)]);
    }
    const Shape tokens_shape{frames, n, spec_.dim};
    x = numkit::add(x, numkit::reshape(numkit::embedding(g.parameter(*spatial_), positions), tokens_shape));
    if (temporal_ != nullptr) {
        x = numkit::add(x,
                        numkit::reshape(numkit::embedding(g.parameter(*temporal_), std::span(time_index)), tokens_shape));
    }
    for (const auto& block : blocks_) x = block(x);
    return final_norm_(x);
}

Tensor Encoder::encode_frames(const Tensor& frames, std::span<const int> times) const {
    const Shape expected{static_cast<std::int64_t>(times.size()), spec_.image_height, spec_.image_width, 3};
    if (frames.shape() != expected) throw numkit::ShapeError("encode", frames.shape(), expected);
    std::vector<std::int64_t> all;
    for (std::size_t f = 0; f < times.size(); ++f) {
        for (std::int64_t i = 0; i < spec_.tokens(); ++i) all.push_back(i);
    }
    Graph g;
    Tensor out = trunk(g, patchify(frames, spec_.patch), all, times).value();
    if (!output_temporal_.empty()) {
        const std::int64_t n = spec_.tokens(), d = spec_.dim;
        for (std::size_t f = 0; f < times.size(); ++f) {
            const auto row = output_temporal_.matrix().row(times[f]);
            for (std::int64_t i = 0; i < n; ++i) {
                Eigen::Map<Eigen::RowVectorXf>(out.ptr() + (static_cast<std::int64_t>(f) * n + i) * d, d) += row;
            }
        }
    }
    return out;
}

LatentTrajectory Encoder::encode(const synthworld::Clip& clip) const {
    std::vector<int> times(static_cast<std::size_t>(clip.rgb.dim(0)));
    std::iota(times.begin(), times.end(), 0);
    return {encode_frames(clip.rgb, times), false, name()};
}

void Encoder::save(const std::filesystem::path& dir) const {
    numkit::save_checkpoint(dir, params_, nlohmann::json{{"kind", "encoder"}, {"spec", spec_}});
}

Encoder Encoder::load(const std::filesystem::path& dir) {
    const auto meta = numkit::read_checkpoint_meta(dir);
    if (meta.value("kind", "") != "encoder") throw numkit::FormatError(dir.string() + ": not an encoder checkpoint");
    Encoder enc(meta.at("spec").get<EncoderSpec>());
    numkit::load_checkpoint(dir, enc.params_);
    return enc;
}

}  // namespace latentcast::backbones
