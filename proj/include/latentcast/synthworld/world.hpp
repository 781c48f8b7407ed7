#pragma once

#include "latentcast/numkit/random.hpp"
#include "latentcast/numkit/tensor.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace latentcast::synthworld {

using numkit::Tensor;

inline constexpr int kContextFrames = 4;
inline constexpr int kFutureFrames = 12;
inline constexpr int kClipFrames = kContextFrames + kFutureFrames;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ShapeKind { rectangle, ellipse, triangle, diamond };

struct WorldConfig {
    int height = 64;
    int width = 64;
    int frames = kClipFrames;
    int objects = 4;
    std::vector<ShapeKind> palette{ShapeKind::rectangle, ShapeKind::ellipse, ShapeKind::triangle, ShapeKind::diamond};
    int size_min = 10;
    int size_max = 18;
    double z_min = 2.0;
    double z_max = 10.0;
    double speed_min = 0.8;
    double speed_max = 1.6;
    /// 1-based index of the first frame whose motion depends on the branch seed.
    int branch_frame = 5;
    /// Number of headings an object may take at branch_frame. 1 gives a deterministic world.
    int branch_count = 4;
    int tracked_points = 16;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// One flat-shaded object. The footprint is a fixed binary mask that is
/// translated by whole pixels, so tracked points move rigidly.
struct SceneObject {
    ShapeKind shape = ShapeKind::rectangle;
    int mask_width = 0;
    int mask_height = 0;
    std::vector<std::uint8_t> mask;  // mask_height x mask_width
    std::array<float, 3> color{};
    double depth = 0.0;
    /// Top-left pixel of the mask per frame.
    std::vector<std::array<int, 2>> origin;

    bool covers(int dx, int dy) const {
        return dx >= 0 && dy >= 0 && dx < mask_width && dy < mask_height &&
               mask[static_cast<std::size_t>(dy * mask_width + dx)] != 0;
    }
};

struct Scene {
    WorldConfig config;
    Tensor background;  // [H, W, 3]
    std::vector<SceneObject> objects;
};

/// A tracked point attached to an object at a mask offset.
struct TrackAnchor {
    int object = 0;
    int dx = 0;
    int dy = 0;
};

struct Clip {
    Tensor rgb;     // [T, H, W, 3] in [0, 1]
    Tensor depth;   // [T, H, W], background at z_max
    Tensor tracks;  // [Q, T, 3]: x, y (pixel centres), visible
    Tensor boxes;   // [K, T, 5]: x_min, y_min, x_max, y_max (exclusive), present
    std::uint64_t world_seed = 0;
    std::uint64_t branch_seed = 0;

    friend bool operator==(const Clip&, const Clip&) = default;
};

/// Object layout and per-frame motion. Everything before branch_frame is a
/// function of world_seed alone.
Scene simulate(std::uint64_t world_seed, std::uint64_t branch_seed, const WorldConfig& config);

/// Index of the front-most object per pixel at frame t (0-based), -1 for background.
std::vector<int> front_ids(const Scene& scene, int t);

/// Q anchors on pixels that are visible in frame 1.
std::vector<TrackAnchor> sample_anchors(const Scene& scene, numkit::Rng& rng, int count);

/// [Q, T, 3] tracks following each anchor's object; visible iff in frame and front-most.
Tensor annotate_tracks(const Scene& scene, const std::vector<TrackAnchor>& anchors);

/// [K, T, 5] tight hulls of each object's in-frame footprint.
Tensor object_boxes(const Scene& scene);

Clip render(const Scene& scene, const std::vector<TrackAnchor>& anchors);

Clip generate_clip(std::uint64_t world_seed, std::uint64_t branch_seed, const WorldConfig& config);

}  // namespace latentcast::synthworld
