#include "latentcast/synthworld/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace latentcast::synthworld {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("world config: " + what);
}

std::vector<std::uint8_t> rasterize(ShapeKind shape, int w, int h) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w * h), 0);
    const double cx = 0.5 * w;
    const double cy = 0.5 * h;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5 - cx) / cx;
            const double v = (y + 0.5 - cy) / cy;
            bool inside = true;
            switch (shape) {
                case ShapeKind::rectangle: break;
                case ShapeKind::ellipse: inside = u * u + v * v <= 1.0; break;
                case ShapeKind::triangle: inside = std::abs(u) <= (y + 0.5) / h; break;
                case ShapeKind::diamond: inside = std::abs(u) + std::abs(v) <= 1.0; break;
            }
            mask[static_cast<std::size_t>(y * w + x)] = inside ? 1 : 0;
        }
    }
    return mask;
}

Tensor make_background(numkit::Rng& rng, int h, int w) {
    Tensor bg({h, w, 3});
    std::array<double, 3> base{};
    for (auto& b : base) b = rng.uniform(0.3, 0.7);
    struct Wave {
        double fx, fy, phase, amplitude;
    };
    std::array<std::array<Wave, 2>, 3> waves{};
    for (auto& channel : waves) {
        for (auto& wave : channel) {
            const double angle = rng.uniform(0.0, kTwoPi);
            const double freq = rng.uniform(1.0, 3.0) * kTwoPi / std::max(h, w);
            wave = {freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, kTwoPi), rng.uniform(0.05, 0.12)};
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = base[static_cast<std::size_t>(c)];
                for (const auto& wave : waves[static_cast<std::size_t>(c)]) {
                    v += wave.amplitude * std::sin(wave.fx * x + wave.fy * y + wave.phase);
                }
                bg[(static_cast<std::int64_t>(y) * w + x) * 3 + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return bg;
}

}  // namespace

void WorldConfig::validate() const {
    require(height >= 1 && width >= 1, "height and width must be positive");
    require(frames == kClipFrames, "frames must be 16 (4 context + 12 future)");
    require(objects >= 1, "objects must be >= 1");
    require(!palette.empty(), "palette must not be empty");
    require(size_min >= 1 && size_min <= size_max && size_max <= std::min(height, width),
            "object size range must satisfy 1 <= size_min <= size_max <= min(height, width)");
    require(z_min > 0.0 && z_min < z_max, "depth range must satisfy 0 < z_min < z_max");
    require(speed_min >= 0.0 && speed_min <= speed_max, "speed range must satisfy 0 <= speed_min <= speed_max");
    require(branch_frame > kContextFrames && branch_frame <= frames, "branch_frame must lie in (4, frames]");
    require(branch_count >= 1, "branch_count must be >= 1");
    require(tracked_points >= 1, "tracked_points must be >= 1");
}

Scene simulate(std::uint64_t world_seed, std::uint64_t branch_seed, const WorldConfig& config) {
    config.validate();
    numkit::Rng rng(numkit::mix_seed(world_seed, 0));
    numkit::Rng branch(numkit::mix_seed(numkit::mix_seed(world_seed, 1), branch_seed));

    Scene scene;
    scene.config = config;
    scene.background = make_background(rng, config.height, config.width);

    const int k_count = config.objects;
    std::vector<int> slots(static_cast<std::size_t>(k_count));
    std::iota(slots.begin(), slots.end(), 0);
    for (int i = k_count - 1; i > 0; --i) {
        std::swap(slots[static_cast<std::size_t>(i)], slots[static_cast<std::size_t>(rng.below(i + 1))]);
    }

    const int pre_steps = config.branch_frame - 2;  // moves completed before the branch frame
    for (int k = 0; k < k_count; ++k) {
        SceneObject obj;
        obj.shape = config.palette[static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(config.palette.size())))];
        obj.mask_width = config.size_min + static_cast<int>(rng.below(config.size_max - config.size_min + 1));
        obj.mask_height = config.size_min + static_cast<int>(rng.below(config.size_max - config.size_min + 1));
        obj.mask = rasterize(obj.shape, obj.mask_width, obj.mask_height);
        for (auto& c : obj.color) c = static_cast<float>(rng.uniform(0.05, 0.95));
        const double layer = (slots[static_cast<std::size_t>(k)] + rng.uniform(0.1, 0.9)) / k_count;
        obj.depth = config.z_min + (config.z_max - config.z_min) * layer;

        const double x0 = rng.uniform(0.0, config.width - obj.mask_width);
        const double y0 = rng.uniform(0.0, config.height - obj.mask_height);
        const double heading = rng.uniform(0.0, kTwoPi);
        const double speed = rng.uniform(config.speed_min, config.speed_max);
        const double turn = kTwoPi * static_cast<double>(branch.below(config.branch_count)) / config.branch_count;

        const double vx0 = speed * std::cos(heading);
        const double vy0 = speed * std::sin(heading);
        const double vx1 = speed * std::cos(heading + turn);
        const double vy1 = speed * std::sin(heading + turn);
        for (int t = 0; t < config.frames; ++t) {
            const int before = std::min(t, pre_steps);
            const int after = std::max(0, t - pre_steps);
            const double x = x0 + vx0 * before + vx1 * after;
            const double y = y0 + vy0 * before + vy1 * after;
            obj.origin.push_back({static_cast<int>(std::floor(x + 0.5)), static_cast<int>(std::floor(y + 0.5))});
        }
        scene.objects.push_back(std::move(obj));
    }
    return scene;
}

std::vector<int> front_ids(const Scene& scene, int t) {
    const int h = scene.config.height;
    const int w = scene.config.width;
    std::vector<int> ids(static_cast<std::size_t>(h * w), -1);
    std::vector<int> order(scene.objects.size());
    std::iota(order.begin(), order.end(), 0);
    // Painter's order: far objects first, so smaller depth overwrites.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scene.objects[static_cast<std::size_t>(a)].depth > scene.objects[static_cast<std::size_t>(b)].depth;
    });
    for (int k : order) {
        const auto& obj = scene.objects[static_cast<std::size_t>(k)];
        const auto [ox, oy] = obj.origin[static_cast<std::size_t>(t)];
        for (int dy = 0; dy < obj.mask_height; ++dy) {
            const int y = oy + dy;
            if (y < 0 || y >= h) continue;
            for (int dx = 0; dx < obj.mask_width; ++dx) {
                const int x = ox + dx;
                if (x < 0 || x >= w || !obj.covers(dx, dy)) continue;
                ids[static_cast<std::size_t>(y * w + x)] = k;
            }
        }
    }
    return ids;
}

std::vector<TrackAnchor> sample_anchors(const Scene& scene, numkit::Rng& rng, int count) {
    const int w = scene.config.width;
    const auto ids = front_ids(scene, 0);
    std::vector<std::vector<int>> visible(scene.objects.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= 0) visible[static_cast<std::size_t>(ids[i])].push_back(static_cast<int>(i));
    }
    std::vector<int> candidates;
    for (std::size_t k = 0; k < visible.size(); ++k) {
        if (!visible[k].empty()) candidates.push_back(static_cast<int>(k));
    }
    if (candidates.empty()) throw std::logic_error("sample_anchors: no object is visible in frame 1");

    std::vector<TrackAnchor> anchors;
    for (int q = 0; q < count; ++q) {
        const int k = candidates[static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(candidates.size())))];
        const auto& pixels = visible[static_cast<std::size_t>(k)];
        const int pixel = pixels[static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(pixels.size())))];
        const auto [ox, oy] = scene.objects[static_cast<std::size_t>(k)].origin[0];
        anchors.push_back({k, pixel % w - ox, pixel / w - oy});
    }
    return anchors;
}

Tensor annotate_tracks(const Scene& scene, const std::vector<TrackAnchor>& anchors) {
    const int frames = scene.config.frames;
    const int h = scene.config.height;
    const int w = scene.config.width;
    Tensor tracks({static_cast<std::int64_t>(anchors.size()), frames, 3});
    for (int t = 0; t < frames; ++t) {
        const auto ids = front_ids(scene, t);
        for (std::size_t q = 0; q < anchors.size(); ++q) {
            const auto& a = anchors[q];
            const auto [ox, oy] = scene.objects[static_cast<std::size_t>(a.object)].origin[static_cast<std::size_t>(t)];
            const int x = ox + a.dx;
            const int y = oy + a.dy;
            const bool inside = x >= 0 && y >= 0 && x < w && y < h;
            const bool visible = inside && ids[static_cast<std::size_t>(y * w + x)] == a.object;
            const std::int64_t at = (static_cast<std::int64_t>(q) * frames + t) * 3;
            tracks[at] = static_cast<float>(x) + 0.5f;
            tracks[at + 1] = static_cast<float>(y) + 0.5f;
            tracks[at + 2] = visible ? 1.0f : 0.0f;
        }
    }
    return tracks;
}

Tensor object_boxes(const Scene& scene) {
    const int frames = scene.config.frames;
    const int h = scene.config.height;
    const int w = scene.config.width;
    Tensor boxes({static_cast<std::int64_t>(scene.objects.size()), frames, 5});
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const auto& obj = scene.objects[k];
        for (int t = 0; t < frames; ++t) {
            const auto [ox, oy] = obj.origin[static_cast<std::size_t>(t)];
            int x_lo = w, y_lo = h, x_hi = -1, y_hi = -1;
            for (int dy = 0; dy < obj.mask_height; ++dy) {
                for (int dx = 0; dx < obj.mask_width; ++dx) {
                    const int x = ox + dx;
                    const int y = oy + dy;
                    if (x < 0 || y < 0 || x >= w || y >= h || !obj.covers(dx, dy)) continue;
                    x_lo = std::min(x_lo, x);
                    y_lo = std::min(y_lo, y);
                    x_hi = std::max(x_hi, x);
                    y_hi = std::max(y_hi, y);
                }
            }
            const std::int64_t at = (static_cast<std::int64_t>(k) * frames + t) * 5;
            if (x_hi < 0) continue;
            boxes[at] = static_cast<float>(x_lo);
            boxes[at + 1] = static_cast<float>(y_lo);
            boxes[at + 2] = static_cast<float>(x_hi + 1);
            boxes[at + 3] = static_cast<float>(y_hi + 1);
            boxes[at + 4] = 1.0f;
        }
    }
    return boxes;
}

Clip render(const Scene& scene, const std::vector<TrackAnchor>& anchors) {
    const auto& cfg = scene.config;
    const std::int64_t hw = static_cast<std::int64_t>(cfg.height) * cfg.width;
    Clip clip;
    clip.rgb = Tensor({cfg.frames, cfg.height, cfg.width, 3});
    clip.depth = Tensor({cfg.frames, cfg.height, cfg.width});
    for (int t = 0; t < cfg.frames; ++t) {
        const auto ids = front_ids(scene, t);
        for (std::int64_t i = 0; i < hw; ++i) {
            const int k = ids[static_cast<std::size_t>(i)];
            const std::int64_t px = t * hw + i;
            if (k < 0) {
                for (int c = 0; c < 3; ++c) clip.rgb[px * 3 + c] = scene.background[i * 3 + c];
                clip.depth[px] = static_cast<float>(cfg.z_max);
            } else {
                const auto& obj = scene.objects[static_cast<std::size_t>(k)];
                for (int c = 0; c < 3; ++c) clip.rgb[px * 3 + c] = obj.color[static_cast<std::size_t>(c)];
                clip.depth[px] = static_cast<float>(obj.depth);
            }
        }
    }
    clip.tracks = annotate_tracks(scene, anchors);
    clip.boxes = object_boxes(scene);
    return clip;
}

Clip generate_clip(std::uint64_t world_seed, std::uint64_t branch_seed, const WorldConfig& config) {
    const Scene scene = simulate(world_seed, branch_seed, config);
    numkit::Rng anchor_rng(numkit::mix_seed(world_seed, 2));
    const auto anchors = sample_anchors(scene, anchor_rng, config.tracked_points);
    Clip clip = render(scene, anchors);
    clip.world_seed = world_seed;
    clip.branch_seed = branch_seed;
    return clip;
}

}  // namespace latentcast::synthworld
