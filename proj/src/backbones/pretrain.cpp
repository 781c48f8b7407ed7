#include "latentcast/backbones/pretrain.hpp"

#include "latentcast/numkit/optim.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace latentcast::backbones {

namespace {

using numkit::Shape;

struct MaeDecoder {
    ParamStore params;
    numkit::Linear<float> input;
    numkit::Parameter* mask_token = nullptr;
    numkit::Parameter* spatial = nullptr;
    numkit::Parameter* temporal = nullptr;
    std::vector<numkit::SelfAttentionBlock<float>> blocks;
    numkit::LayerNorm<float> norm;
    numkit::Linear<float> head;

    MaeDecoder(const EncoderSpec& spec, int window, numkit::Rng& rng) {
        const std::int64_t d = spec.dim;
        input = numkit::Linear<float>(params, "input", d, d, rng);
        mask_token = &params.create("mask_token", rng.normal_tensor<float>({1, d}, 0.02));
        spatial = &params.create("spatial", rng.normal_tensor<float>({spec.tokens(), d}, 0.02));
        temporal = &params.create("temporal", rng.normal_tensor<float>({window, d}, 0.02));
        for (int i = 0; i < spec.decoder_depth; ++i) {
            blocks.emplace_back(params, fmt::format("block{}", i), d, spec.heads, rng);
        }
        norm = numkit::LayerNorm<float>(params, "norm", d);
        head = numkit::Linear<float>(params, "head", d, spec.patch_dim(), rng);
    }
};

// One masked-reconstruction batch laid out for the encoder and decoder.
struct MaskedBatch {
    Tensor visible;                           // [F, n_visible, P]
    std::vector<std::int64_t> positions;      // F * n_visible token indices
    std::vector<int> times;                   // F absolute frame indices
    std::vector<std::int64_t> scatter;        // full-sequence row -> encoded row, or mask row
    std::vector<std::int64_t> window_slot;    // full-sequence row -> frame within window
    std::vector<std::int64_t> window_token;   // full-sequence row -> token index
    std::vector<std::int64_t> targets_rows;   // rows of the full sequence that are scored
    Tensor targets;                           // [targets_rows.size(), P]
};

MaskedBatch make_batch(const EncoderSpec& spec, int window, const synthworld::Dataset& data, numkit::Rng& rng) {
    const int n = spec.tokens();
    const int masked = static_cast<int>(std::lround(spec.mask_ratio * n));
    const int keep = n - masked;
    const int windows = spec.batch;
    const std::int64_t frames = static_cast<std::int64_t>(windows) * window;
    const std::int64_t pd = spec.patch_dim();
    const std::int64_t frame_size = static_cast<std::int64_t>(spec.image_height) * spec.image_width * 3;

    Tensor rgb({frames, spec.image_height, spec.image_width, 3});
    MaskedBatch b;
    std::vector<std::vector<int>> order(static_cast<std::size_t>(windows));
    for (int w = 0; w < windows; ++w) {
        const auto& clip = data.clips[static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(data.clips.size())))];
        const int t0 = static_cast<int>(rng.below(synthworld::kClipFrames - window + 1));
        for (int j = 0; j < window; ++j) {
            const std::int64_t f = static_cast<std::int64_t>(w) * window + j;
            std::copy_n(clip.rgb.ptr() + (t0 + j) * frame_size, frame_size, rgb.ptr() + f * frame_size);
            b.times.push_back(t0 + j);
        }
        auto& perm = order[static_cast<std::size_t>(w)];
        perm.resize(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.below(i + 1))]);
        std::sort(perm.begin(), perm.begin() + keep);
        std::sort(perm.begin() + keep, perm.end());
    }
    const Tensor patches = patchify(rgb, spec.patch);

    b.visible = Tensor({frames, keep, pd});
    const std::int64_t mask_row = frames * keep;
    std::vector<float> target_values;
    for (int w = 0; w < windows; ++w) {
        const auto& perm = order[static_cast<std::size_t>(w)];
        std::vector<std::int64_t> rank(static_cast<std::size_t>(n), -1);
        for (int i = 0; i < keep; ++i) rank[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
        for (int j = 0; j < window; ++j) {
            const std::int64_t f = static_cast<std::int64_t>(w) * window + j;
            for (int i = 0; i < keep; ++i) {
                const int token = perm[static_cast<std::size_t>(i)];
                b.positions.push_back(token);
                std::copy_n(patches.ptr() + (f * n + token) * pd, pd, b.visible.ptr() + (f * keep + i) * pd);
            }
            for (int token = 0; token < n; ++token) {
                const std::int64_t r = rank[static_cast<std::size_t>(token)];
                const auto row = static_cast<std::int64_t>(b.scatter.size());
                b.scatter.push_back(r >= 0 ? f * keep + r : mask_row);
                b.window_slot.push_back(j);
                b.window_token.push_back(token);
                if (r < 0 || masked == 0) {
                    b.targets_rows.push_back(row);
                    const float* src = patches.ptr() + (f * n + token) * pd;
                    target_values.insert(target_values.end(), src, src + pd);
                }
            }
        }
    }
    b.targets = Tensor({static_cast<std::int64_t>(b.targets_rows.size()), pd}, target_values);
    return b;
}

}  // namespace

PretrainReport pretrain_encoder(Encoder& encoder, const synthworld::Dataset& train) {
    const EncoderSpec& spec = encoder.spec();
    if (!spec.trainable()) {
        throw std::invalid_argument(fmt::format("pretrain_encoder: variant {} has no pretraining", to_string(spec.variant)));
    }
    if (train.clips.empty()) throw std::invalid_argument("pretrain_encoder: empty training set");
    const int window = spec.variant == Variant::video_mae ? spec.window : 1;
    EncoderSpec batch_spec = spec;
    batch_spec.batch = spec.variant == Variant::video_mae ? spec.batch : spec.batch * spec.window;
    const int batch_window = window;

    numkit::Rng rng(numkit::mix_seed(spec.seed, 0x9E7A));
    MaeDecoder decoder(spec, batch_window, rng);
    numkit::OptimizerState enc_opt, dec_opt;
    enc_opt.config.clip_norm = dec_opt.config.clip_norm = 1.0;

    PretrainReport report;
    const std::int64_t d = spec.dim;
    const std::int64_t n = spec.tokens();
    for (int step = 0; step < spec.pretrain_steps; ++step) {
        const double lr = numkit::warmup_cosine(spec.learning_rate, step, spec.pretrain_steps, spec.pretrain_steps / 20);
        enc_opt.config.learning_rate = dec_opt.config.learning_rate = lr;
        const MaskedBatch b = make_batch(batch_spec, batch_window, train, rng);
        const std::int64_t windows = batch_spec.batch;

        Graph g;
        auto enc = encoder.trunk(g, b.visible, b.positions, b.times);
        auto rows = numkit::reshape(decoder.input(enc), Shape{enc.value().size() / d, d});
        const std::vector<Var> parts{rows, g.parameter(*decoder.mask_token)};
        auto seq = numkit::embedding(numkit::concat_rows(std::span<const Var>(parts)), b.scatter);
        seq = numkit::add(seq, numkit::embedding(g.parameter(*decoder.spatial), b.window_token));
        seq = numkit::add(seq, numkit::embedding(g.parameter(*decoder.temporal), b.window_slot));
        auto x = numkit::reshape(seq, Shape{windows, batch_window * n, d});
        for (const auto& block : decoder.blocks) x = block(x);
        auto pred = decoder.head(decoder.norm(x));
        pred = numkit::reshape(pred, Shape{windows * batch_window * n, spec.patch_dim()});
        auto loss = numkit::mse(numkit::embedding(pred, b.targets_rows), b.targets);

        const double value = loss.value().item();
        if (!std::isfinite(value)) {
            throw numkit::TrainingDiverged(fmt::format("pretrain_encoder({}): loss {} at step {} (lr {:.3g}, last finite {:.4g})",
                                                       to_string(spec.variant), value, step, lr,
                                                       report.losses.empty() ? 0.0 : report.losses.back()));
        }
        report.losses.push_back(value);
        encoder.params().zero_grad();
        decoder.params.zero_grad();
        g.backward(loss);
        numkit::adam_step(enc_opt, encoder.params());
        numkit::adam_step(dec_opt, decoder.params);
        if (step % 100 == 0 || step + 1 == spec.pretrain_steps) {
            spdlog::debug("pretrain {} step {} loss {:.5f}", to_string(spec.variant), step, value);
        }
    }
    return report;
}

}  // namespace latentcast::backbones
