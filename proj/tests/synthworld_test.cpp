#include "latentcast/numkit/io.hpp"
#include "latentcast/synthworld/dataset.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace latentcast::synthworld;
using latentcast::numkit::Tensor;

namespace {

// Frames [t0, t1) of a [T, ...] tensor, as a flat copy.
std::vector<float> frames_of(const Tensor& t, int t0, int t1) {
    const std::int64_t per = t.size() / t.dim(0);
    return {t.data().begin() + t0 * per, t.data().begin() + t1 * per};
}

// Frames [t0, t1) of a [N, T, C] per-entity tensor.
std::vector<float> entity_frames(const Tensor& t, int t0, int t1) {
    std::vector<float> out;
    const std::int64_t frames = t.dim(1), c = t.dim(2);
    for (std::int64_t n = 0; n < t.dim(0); ++n) {
        for (std::int64_t f = t0; f < t1; ++f) {
            for (std::int64_t k = 0; k < c; ++k) out.push_back(t[(n * frames + f) * c + k]);
        }
    }
    return out;
}

SceneObject square(int size, double depth, std::vector<std::array<int, 2>> origin) {
    SceneObject obj;
    obj.mask_width = size;
    obj.mask_height = size;
    obj.mask.assign(static_cast<std::size_t>(size * size), 1);
    obj.color = {0.9f, 0.1f, 0.1f};
    obj.depth = depth;
    obj.origin = std::move(origin);
    return obj;
}

Scene blank_scene(int size = 32) {
    Scene scene;
    scene.config.height = size;
    scene.config.width = size;
    scene.config.size_min = 2;
    scene.config.size_max = 8;
    scene.background = Tensor({size, size, 3}, 0.5f);
    return scene;
}

std::vector<std::array<int, 2>> linear_path(int x0, int y0, int vx, int vy) {
    std::vector<std::array<int, 2>> path;
    for (int t = 0; t < kClipFrames; ++t) path.push_back({x0 + vx * t, y0 + vy * t});
    return path;
}

float visible_at(const Tensor& tracks, int q, int t) { return tracks[(q * kClipFrames + t) * 3 + 2]; }

}  // namespace

TEST(WorldConfig, RejectsInvalidFields) {
    WorldConfig c;
    c.frames = 12;
    EXPECT_THROW(c.validate(), ConfigError);
    c = WorldConfig{};
    c.branch_frame = 4;
    EXPECT_THROW(c.validate(), ConfigError);
    c = WorldConfig{};
    c.objects = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = WorldConfig{};
    c.tracked_points = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = WorldConfig{};
    c.z_min = 12.0;
    EXPECT_THROW(generate_clip(1, 0, c), ConfigError);
    EXPECT_NO_THROW(WorldConfig{}.validate());
}

TEST(GenerateClip, SameSeedsGiveIdenticalClips) {
    const WorldConfig c;
    const Clip a = generate_clip(42, 3, c);
    EXPECT_EQ(a, generate_clip(42, 3, c));
    EXPECT_EQ(a.rgb.shape(), (latentcast::numkit::Shape{16, 64, 64, 3}));
    EXPECT_EQ(a.depth.shape(), (latentcast::numkit::Shape{16, 64, 64}));
    EXPECT_EQ(a.tracks.shape(), (latentcast::numkit::Shape{16, 16, 3}));
    EXPECT_EQ(a.boxes.shape(), (latentcast::numkit::Shape{4, 16, 5}));
    EXPECT_GE(a.rgb.array().minCoeff(), 0.0f);
    EXPECT_LE(a.rgb.array().maxCoeff(), 1.0f);
    EXPECT_GT(a.depth.array().minCoeff(), 0.0f);
}

TEST(GenerateClip, ContextIsBranchInvariantAndFutureBranches) {
    const WorldConfig c;
    for (std::uint64_t world = 1; world <= 8; ++world) {
        const Clip a = generate_clip(world, 0, c);
        for (std::uint64_t branch = 1; branch < 4; ++branch) {
            const Clip b = generate_clip(world, branch, c);
            EXPECT_EQ(frames_of(a.rgb, 0, 4), frames_of(b.rgb, 0, 4));
            EXPECT_EQ(frames_of(a.depth, 0, 4), frames_of(b.depth, 0, 4));
            EXPECT_EQ(entity_frames(a.tracks, 0, 4), entity_frames(b.tracks, 0, 4));
            EXPECT_EQ(entity_frames(a.boxes, 0, 4), entity_frames(b.boxes, 0, 4));
        }
        EXPECT_NE(frames_of(a.rgb, 4, 16), frames_of(generate_clip(world, 1, c).rgb, 4, 16)) << "world " << world;
    }
}

TEST(GenerateClip, StaticSceneHasConstantBoxes) {
    WorldConfig c;
    c.objects = 1;
    c.speed_min = 0.0;
    c.speed_max = 0.0;
    const Clip clip = generate_clip(9, 2, c);
    for (int t = 1; t < 16; ++t) {
        for (int k = 0; k < 5; ++k) EXPECT_EQ(clip.boxes[t * 5 + k], clip.boxes[k]);
    }
    EXPECT_EQ(clip.boxes[4], 1.0f);
}

TEST(GenerateClip, DeterministicWorldIgnoresBranchSeed) {
    WorldConfig c;
    c.branch_count = 1;
    EXPECT_EQ(generate_clip(5, 0, c).rgb, generate_clip(5, 7, c).rgb);
}

TEST(GenerateClip, BranchesSpreadFinalBoxCentres) {
    WorldConfig c;
    c.branch_count = 4;
    int checked = 0;
    for (std::uint64_t world = 100; world < 110; ++world) {
        std::vector<std::vector<std::array<float, 2>>> centres(static_cast<std::size_t>(c.objects));
        for (std::uint64_t branch = 0; branch < 16; ++branch) {
            const Clip clip = generate_clip(world, branch, c);
            for (int k = 0; k < c.objects; ++k) {
                const float* b = clip.boxes.ptr() + (k * 16 + 15) * 5;
                if (b[4] == 0.0f) continue;
                centres[static_cast<std::size_t>(k)].push_back({0.5f * (b[0] + b[2]), 0.5f * (b[1] + b[3])});
            }
        }
        for (const auto& pts : centres) {
            if (pts.size() < 2) continue;
            float spread = 0.0f;
            for (const auto& p : pts) {
                for (const auto& q : pts) spread = std::max(spread, std::hypot(p[0] - q[0], p[1] - q[1]));
            }
            EXPECT_GT(spread, 2.0f) << "world " << world;
            ++checked;
        }
    }
    EXPECT_GT(checked, 20);
}

TEST(GenerateClip, BoxesAreHullsOfEachObjectsPixels) {
    const WorldConfig c;
    for (std::uint64_t world = 0; world < 4; ++world) {
        const Scene scene = simulate(world, 1, c);
        const Tensor boxes = object_boxes(scene);
        for (std::size_t k = 0; k < scene.objects.size(); ++k) {
            Scene alone = scene;
            alone.objects = {scene.objects[k]};
            for (int t = 0; t < 16; ++t) {
                const auto ids = front_ids(alone, t);
                int x0 = c.width, y0 = c.height, x1 = 0, y1 = 0;
                bool any = false;
                for (int y = 0; y < c.height; ++y) {
                    for (int x = 0; x < c.width; ++x) {
                        if (ids[static_cast<std::size_t>(y * c.width + x)] != 0) continue;
                        any = true;
                        x0 = std::min(x0, x);
                        y0 = std::min(y0, y);
                        x1 = std::max(x1, x + 1);
                        y1 = std::max(y1, y + 1);
                    }
                }
                const float* b = boxes.ptr() + (static_cast<std::int64_t>(k) * 16 + t) * 5;
                ASSERT_EQ(b[4], any ? 1.0f : 0.0f);
                if (!any) continue;
                EXPECT_EQ(b[0], x0);
                EXPECT_EQ(b[1], y0);
                EXPECT_EQ(b[2], x1);
                EXPECT_EQ(b[3], y1);
                EXPECT_LE(b[0], b[2]);
                EXPECT_LE(b[1], b[3]);
            }
        }
    }
}

TEST(GenerateClip, VisibleTracksSitOnTheirObjectsDepth) {
    const WorldConfig c;
    for (std::uint64_t world = 0; world < 6; ++world) {
        const Scene scene = simulate(world, 2, c);
        latentcast::numkit::Rng rng(latentcast::numkit::mix_seed(world, 2));
        const auto anchors = sample_anchors(scene, rng, c.tracked_points);
        const Clip clip = render(scene, anchors);
        for (int q = 0; q < c.tracked_points; ++q) {
            EXPECT_EQ(visible_at(clip.tracks, q, 0), 1.0f);
            for (int t = 0; t < 16; ++t) {
                if (visible_at(clip.tracks, q, t) == 0.0f) continue;
                const float* p = clip.tracks.ptr() + (q * 16 + t) * 3;
                const auto x = static_cast<int>(p[0]);
                const auto y = static_cast<int>(p[1]);
                ASSERT_TRUE(x >= 0 && y >= 0 && x < c.width && y < c.height);
                const float z = clip.depth[(static_cast<std::int64_t>(t) * c.height + y) * c.width + x];
                EXPECT_NEAR(z, scene.objects[static_cast<std::size_t>(anchors[static_cast<std::size_t>(q)].object)].depth,
                            1e-6 * z);
            }
        }
    }
}

TEST(AnnotateTracks, FrontObjectInsideFrameIsAlwaysVisible) {
    Scene scene = blank_scene();
    scene.objects.push_back(square(6, 3.0, linear_path(4, 4, 1, 1)));
    const Tensor tracks = annotate_tracks(scene, {{0, 2, 3}});
    for (int t = 0; t < 16; ++t) {
        EXPECT_EQ(visible_at(tracks, 0, t), 1.0f);
        EXPECT_EQ(tracks[t * 3], 4 + t + 2 + 0.5f);
        EXPECT_EQ(tracks[t * 3 + 1], 4 + t + 3 + 0.5f);
    }
}

TEST(AnnotateTracks, ExitAndReentryFollowBounds) {
    Scene scene = blank_scene();
    auto path = linear_path(20, 10, 3, 0);
    for (int t = 9; t < 16; ++t) path[static_cast<std::size_t>(t)] = {path[8][0] - 3 * (t - 8), 10};
    scene.objects.push_back(square(5, 3.0, path));
    const Tensor tracks = annotate_tracks(scene, {{0, 4, 1}});
    int hidden = 0;
    for (int t = 0; t < 16; ++t) {
        const int x = path[static_cast<std::size_t>(t)][0] + 4;
        const bool inside = x >= 0 && x < 32;
        hidden += inside ? 0 : 1;
        EXPECT_EQ(visible_at(tracks, 0, t), inside ? 1.0f : 0.0f) << "frame " << t;
    }
    EXPECT_GT(hidden, 0);
}

TEST(AnnotateTracks, OccludedExactlyOnOverlapFrames) {
    Scene scene = blank_scene();
    scene.objects.push_back(square(6, 8.0, linear_path(12, 12, 0, 0)));
    scene.objects.push_back(square(4, 2.0, linear_path(0, 13, 2, 0)));
    const TrackAnchor anchor{0, 3, 2};
    const Tensor tracks = annotate_tracks(scene, {anchor});
    int occluded = 0;
    for (int t = 0; t < 16; ++t) {
        // z-buffer at the point's pixel: nearest surface covering it.
        const int x = 12 + anchor.dx;
        const int y = 12 + anchor.dy;
        double nearest = 1e9;
        int owner = -1;
        for (int k = 0; k < 2; ++k) {
            const auto& obj = scene.objects[static_cast<std::size_t>(k)];
            const auto [ox, oy] = obj.origin[static_cast<std::size_t>(t)];
            if (obj.covers(x - ox, y - oy) && obj.depth < nearest) {
                nearest = obj.depth;
                owner = k;
            }
        }
        occluded += owner == 1 ? 1 : 0;
        EXPECT_EQ(visible_at(tracks, 0, t), owner == 0 ? 1.0f : 0.0f) << "frame " << t;
    }
    EXPECT_GT(occluded, 0);
    EXPECT_LT(occluded, 16);
}

TEST(Dataset, SplitsAreDisjointByWorld) {
    std::set<std::uint64_t> seen;
    std::size_t total = 0;
    for (auto split : {Split::train, Split::readout_train, Split::eval}) {
        std::set<std::uint64_t> worlds;
        for (const auto& s : split_seeds(split, 7, 50, 3)) worlds.insert(s.world_seed);
        EXPECT_EQ(worlds.size(), 50u);
        total += worlds.size();
        seen.insert(worlds.begin(), worlds.end());
    }
    EXPECT_EQ(seen.size(), total);
}

class DatasetFiles : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("lc_dataset_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::remove_all(dir_);
        config_.objects = 3;
        dataset_ = make_dataset(config_, Split::readout_train, split_seeds(Split::readout_train, 3, 3, 2));
        write_dataset(dataset_, dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::filesystem::path dir_;
    WorldConfig config_;
    Dataset dataset_;
};

TEST_F(DatasetFiles, RoundTripIsExact) {
    const Dataset back = read_dataset(dir_);
    EXPECT_EQ(back.split, Split::readout_train);
    EXPECT_EQ(back.seeds(), dataset_.seeds());
    ASSERT_EQ(back.clips.size(), 6u);
    for (std::size_t i = 0; i < back.clips.size(); ++i) EXPECT_EQ(back.clips[i], dataset_.clips[i]);
    EXPECT_EQ(back.config.objects, 3);
}

TEST_F(DatasetFiles, RegenerationFromManifestSeedsMatchesStoredClips) {
    const Dataset stored = read_dataset(dir_);
    const Dataset rebuilt = regenerate(dir_);
    ASSERT_EQ(rebuilt.clips.size(), stored.clips.size());
    for (std::size_t i = 0; i < stored.clips.size(); ++i) EXPECT_EQ(rebuilt.clips[i], stored.clips[i]);
}

TEST_F(DatasetFiles, CorruptMagicIsRejected) {
    const auto file = dir_ / "clip_00000.rgb.lten";
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    EXPECT_THROW(read_dataset(dir_), latentcast::numkit::FormatError);
}

TEST_F(DatasetFiles, TruncatedTensorIsRejected) {
    const auto file = dir_ / "clip_00001.depth.lten";
    std::filesystem::resize_file(file, std::filesystem::file_size(file) - 7);
    EXPECT_THROW(read_dataset(dir_), latentcast::numkit::FormatError);
}

TEST_F(DatasetFiles, VersionMismatchIsRejected) {
    auto manifest = read_dataset_manifest(dir_);
    manifest["version"] = 99;
    latentcast::numkit::write_text_file(dir_ / "manifest.json", manifest.dump());
    EXPECT_THROW(read_dataset(dir_), latentcast::numkit::FormatError);
}

TEST_F(DatasetFiles, ReadsAreAudited) {
    latentcast::numkit::ReadAudit audit;
    read_dataset(dir_);
    EXPECT_EQ(audit.paths().size(), 1u + 6u * 4u);
}
