#include "latentcast/backbones/normalization.hpp"
#include "latentcast/backbones/pretrain.hpp"
#include "latentcast/numkit/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace latentcast;
using backbones::Encoder;
using backbones::EncoderSpec;
using backbones::Variant;
using numkit::Tensor;

namespace {

const synthworld::Dataset& small_train() {
    static const auto ds = synthworld::make_dataset(synthworld::WorldConfig{}, synthworld::Split::train,
                                                    synthworld::split_seeds(synthworld::Split::train, 11, 24));
    return ds;
}

EncoderSpec spec_for(Variant v, int steps = 0) {
    EncoderSpec s;
    s.variant = v;
    s.pretrain_steps = steps;
    s.seed = 5;
    return s;
}

std::vector<float> frame_range(const Tensor& tokens, int t0, int t1) {
    const std::int64_t per = tokens.size() / tokens.dim(0);
    return {tokens.data().begin() + t0 * per, tokens.data().begin() + t1 * per};
}

}  // namespace

TEST(Patchify, RoundTripsAndOrdersTokensInRaster) {
    numkit::Rng rng(1);
    const Tensor frames = rng.normal_tensor<float>({2, 8, 12, 3});
    const Tensor patches = backbones::patchify(frames, 4);
    EXPECT_EQ(patches.shape(), (numkit::Shape{2, 6, 48}));
    EXPECT_EQ(backbones::unpatchify(patches, 4, 8, 12, 3), frames);
    // Token 4 is grid row 1, column 1: its first value is pixel (4, 4).
    EXPECT_EQ(patches[4 * 48], frames[(4 * 12 + 4) * 3]);
    EXPECT_THROW(backbones::patchify(frames, 5), numkit::ShapeError);
}

TEST(Encoder, PixelIdentityOfBlackClipIsZero) {
    const Encoder enc(spec_for(Variant::pixel_identity));
    synthworld::Clip clip = synthworld::generate_clip(1, 0, synthworld::WorldConfig{});
    clip.rgb = Tensor(clip.rgb.shape());
    const auto latents = enc.encode(clip);
    EXPECT_EQ(latents.tokens.shape(), (numkit::Shape{16, 16, 768}));
    EXPECT_EQ(latents.tokens.array().abs().maxCoeff(), 0.0f);
}

TEST(Encoder, PixelIdentityIsAnOrthogonalMapOfPatches) {
    const Encoder enc(spec_for(Variant::pixel_identity));
    const auto clip = synthworld::generate_clip(2, 0, synthworld::WorldConfig{});
    const Tensor tokens = enc.encode(clip).tokens;
    const Tensor patches = backbones::patchify(clip.rgb, 16);
    EXPECT_NEAR(tokens.matrix().norm(), patches.matrix().norm(), 1e-3 * patches.matrix().norm());
}

TEST(Encoder, EncodingIsDeterministicAndLeavesWeightsUntouched) {
    for (auto v : {Variant::random_frozen, Variant::pixel_identity, Variant::image_mae, Variant::video_mae}) {
        const Encoder enc(spec_for(v));
        const auto before = enc.checksum();
        const auto clip = synthworld::generate_clip(3, 1, synthworld::WorldConfig{});
        const auto a = enc.encode(clip);
        const auto b = enc.encode(clip);
        EXPECT_EQ(a.tokens, b.tokens) << enc.name();
        EXPECT_TRUE(a.tokens.all_finite());
        EXPECT_FALSE(a.normalized);
        EXPECT_EQ(enc.checksum(), before);
    }
}

TEST(Encoder, ContextLatentsIgnoreFutureFrames) {
    const Encoder enc(spec_for(Variant::video_mae));
    const synthworld::WorldConfig c;
    const auto a = enc.encode(synthworld::generate_clip(4, 0, c)).tokens;
    const auto b = enc.encode(synthworld::generate_clip(4, 1, c)).tokens;
    EXPECT_EQ(frame_range(a, 0, 4), frame_range(b, 0, 4));
    EXPECT_NE(frame_range(a, 4, 16), frame_range(b, 4, 16));
}

TEST(Encoder, ImageEncoderCarriesTemporalEmbedding) {
    const Encoder enc(spec_for(Variant::image_mae));
    const auto clip = synthworld::generate_clip(5, 0, synthworld::WorldConfig{});
    Tensor still({2, 64, 64, 3});
    std::copy_n(clip.rgb.ptr(), 64 * 64 * 3, still.ptr());
    std::copy_n(clip.rgb.ptr(), 64 * 64 * 3, still.ptr() + 64 * 64 * 3);
    const std::vector<int> times{0, 9};
    const Tensor tokens = enc.encode_frames(still, times);
    EXPECT_NE(frame_range(tokens, 0, 1), frame_range(tokens, 1, 2));
}

TEST(Encoder, RejectsMismatchedClip) {
    const Encoder enc(spec_for(Variant::random_frozen));
    synthworld::WorldConfig small;
    small.height = 32;
    small.width = 32;
    small.size_max = 12;
    EXPECT_THROW(enc.encode(synthworld::generate_clip(1, 0, small)), numkit::ShapeError);
}

TEST(Encoder, CheckpointRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "lc_encoder_ckpt";
    std::filesystem::remove_all(dir);
    const Encoder enc(spec_for(Variant::video_mae));
    enc.save(dir);
    const Encoder back = Encoder::load(dir);
    EXPECT_EQ(back.checksum(), enc.checksum());
    EXPECT_EQ(back.spec().variant, Variant::video_mae);
    const auto clip = synthworld::generate_clip(6, 0, synthworld::WorldConfig{});
    EXPECT_EQ(back.encode(clip).tokens, enc.encode(clip).tokens);
    std::filesystem::remove_all(dir);
}

TEST(Pretrain, UntrainableVariantsAreRejected) {
    Encoder random(spec_for(Variant::random_frozen, 10));
    EXPECT_THROW(backbones::pretrain_encoder(random, small_train()), std::invalid_argument);
    Encoder pixels(spec_for(Variant::pixel_identity, 10));
    EXPECT_THROW(backbones::pretrain_encoder(pixels, small_train()), std::invalid_argument);
}

TEST(Pretrain, PlainAutoencodingImproves) {
    auto spec = spec_for(Variant::image_mae, 60);
    spec.mask_ratio = 0.0;
    Encoder enc(spec);
    const auto report = backbones::pretrain_encoder(enc, small_train());
    ASSERT_EQ(report.losses.size(), 60u);
    EXPECT_LT(report.losses.back(), report.losses.front());
}

TEST(Pretrain, DefaultBudgetHalvesMaskedLoss) {
    for (auto v : {Variant::video_mae, Variant::image_mae}) {
        Encoder enc(spec_for(v, EncoderSpec{}.pretrain_steps));
        const auto before = enc.checksum();
        const auto report = backbones::pretrain_encoder(enc, small_train());
        EXPECT_LT(report.losses.back(), 0.5 * report.losses.front()) << backbones::to_string(v);
        EXPECT_NE(enc.checksum(), before);
    }
}

TEST(Normalization, RoundTripIsIdentity) {
    const Encoder enc(spec_for(Variant::random_frozen));
    std::vector<backbones::LatentTrajectory> lat;
    for (std::uint64_t w = 0; w < 4; ++w) lat.push_back(enc.encode(synthworld::generate_clip(w, 0, synthworld::WorldConfig{})));
    const auto stats = backbones::compute_norm_stats(lat);
    const auto norm = backbones::normalize(lat[0], stats);
    EXPECT_TRUE(norm.normalized);
    const auto back = backbones::denormalize(norm, stats);
    EXPECT_LT((back.tokens.array() - lat[0].tokens.array()).abs().maxCoeff(), 1e-5);
    EXPECT_THROW(backbones::normalize(norm, stats), std::invalid_argument);
}

TEST(Normalization, ConstantChannelIsClampedToZeros) {
    std::vector<backbones::LatentTrajectory> lat(2);
    numkit::Rng rng(3);
    for (auto& l : lat) {
        l.tokens = rng.normal_tensor<float>({16, 4, 3});
        for (std::int64_t r = 0; r < 64; ++r) l.tokens[r * 3 + 1] = 2.5f;
    }
    const auto stats = backbones::compute_norm_stats(lat);
    EXPECT_EQ(stats.clamped_channels, 1);
    const auto norm = backbones::normalize(lat[1], stats);
    for (std::int64_t r = 0; r < 64; ++r) EXPECT_EQ(norm.tokens[r * 3 + 1], 0.0f);
}

TEST(Normalization, HeldOutMomentsAreStandardized) {
    const Encoder enc(spec_for(Variant::image_mae));
    const synthworld::WorldConfig c;
    auto encode_split = [&](synthworld::Split split, int worlds) {
        std::vector<backbones::LatentTrajectory> out;
        for (const auto& s : synthworld::split_seeds(split, 21, worlds)) {
            out.push_back(enc.encode(synthworld::generate_clip(s.world_seed, s.branch_seed, c)));
        }
        return out;
    };
    const auto stats = backbones::compute_norm_stats(encode_split(synthworld::Split::train, 2048));
    const auto held_out = encode_split(synthworld::Split::eval, 1024);
    const std::int64_t d = stats.mean.size();
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(d), sq = Eigen::ArrayXd::Zero(d);
    double rows = 0;
    for (const auto& l : held_out) {
        const auto m = backbones::normalize(l, stats).tokens.matrix().cast<double>();
        sum += m.colwise().sum().transpose().array();
        sq += m.array().square().colwise().sum().transpose();
        rows += static_cast<double>(m.rows());
    }
    const Eigen::ArrayXd mean = sum / rows;
    const Eigen::ArrayXd var = sq / rows - mean.square();
    EXPECT_LT(mean.abs().maxCoeff(), 0.05);
    EXPECT_GT(var.minCoeff(), 0.8);
    EXPECT_LT(var.maxCoeff(), 1.2);
}

TEST(Normalization, StatsSurviveCheckpointing) {
    const auto dir = std::filesystem::temp_directory_path() / "lc_norm_stats";
    std::filesystem::remove_all(dir);
    backbones::NormStats stats{Tensor({3}, std::vector<float>{1, 2, 3}), Tensor({3}, std::vector<float>{0.5f, 1, 2}), 0};
    backbones::save_norm_stats(dir, stats);
    const auto back = backbones::load_norm_stats(dir);
    EXPECT_EQ(back.mean, stats.mean);
    EXPECT_EQ(back.stddev, stats.stddev);
    std::filesystem::remove_all(dir);
}
