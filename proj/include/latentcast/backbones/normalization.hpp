#pragma once

#include "latentcast/backbones/encoder.hpp"

#include <filesystem>
#include <span>

namespace latentcast::backbones {

/// Per-channel moments of latent tokens over a training population.
struct NormStats {
    Tensor mean;    // [D]
    Tensor stddev;  // [D], clamped below at sqrt(kVarianceFloor)
    int clamped_channels = 0;
};

inline constexpr double kVarianceFloor = 1e-6;

/// Accumulates in double over every frame and token. A channel whose variance
/// is below the floor is clamped to it and logged as a warning.
NormStats compute_norm_stats(std::span<const LatentTrajectory> latents);

/// Throws if the trajectory is already normalized or channels disagree.
LatentTrajectory normalize(const LatentTrajectory& latents, const NormStats& stats);
LatentTrajectory denormalize(const LatentTrajectory& latents, const NormStats& stats);

/// Raw [..., D] tensor variants of the above.
Tensor normalize_tokens(const Tensor& tokens, const NormStats& stats);
Tensor denormalize_tokens(const Tensor& tokens, const NormStats& stats);

void save_norm_stats(const std::filesystem::path& dir, const NormStats& stats);
NormStats load_norm_stats(const std::filesystem::path& dir);

}  // namespace latentcast::backbones
