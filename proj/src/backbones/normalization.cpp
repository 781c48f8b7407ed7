#include "latentcast/backbones/normalization.hpp"

#include "latentcast/numkit/io.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace latentcast::backbones {

namespace {

void check_channels(const Tensor& tokens, const NormStats& stats, const char* op) {
    if (tokens.cols() != stats.mean.size()) throw numkit::ShapeError(op, tokens.shape(), stats.mean.shape());
}

}  // namespace

NormStats compute_norm_stats(std::span<const LatentTrajectory> latents) {
    if (latents.empty()) throw std::invalid_argument("compute_norm_stats: no latents");
    const std::int64_t d = latents.front().tokens.cols();
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(d);
    Eigen::ArrayXd sum_sq = Eigen::ArrayXd::Zero(d);
    double count = 0.0;
    for (const auto& traj : latents) {
        if (traj.normalized) throw std::invalid_argument("compute_norm_stats: latents are already normalized");
        if (traj.tokens.cols() != d) throw numkit::ShapeError("compute_norm_stats", latents.front().tokens.shape(), traj.tokens.shape());
        const auto m = traj.tokens.matrix().cast<double>();
        sum += m.colwise().sum().array().transpose();
        count += static_cast<double>(m.rows());
    }
    const Eigen::ArrayXd mean = sum / count;
    for (const auto& traj : latents) {
        const auto m = traj.tokens.matrix().cast<double>();
        sum_sq += (m.rowwise() - mean.matrix().transpose()).array().square().colwise().sum().transpose();
    }
    Eigen::ArrayXd var = sum_sq / count;
    NormStats stats;
    for (Eigen::Index c = 0; c < d; ++c) {
        if (var(c) < kVarianceFloor) {
            var(c) = kVarianceFloor;
            ++stats.clamped_channels;
        }
    }
    if (stats.clamped_channels > 0) {
        spdlog::warn("compute_norm_stats: {} of {} channels have variance below {:g}; clamped", stats.clamped_channels, d,
                     kVarianceFloor);
    }
    stats.mean = Tensor({d});
    stats.stddev = Tensor({d});
    stats.mean.array() = mean.cast<float>();
    stats.stddev.array() = var.sqrt().cast<float>();
    return stats;
}

Tensor normalize_tokens(const Tensor& tokens, const NormStats& stats) {
    check_channels(tokens, stats, "normalize");
    Tensor out(tokens.shape());
    out.matrix().array() = (tokens.matrix().array().rowwise() - stats.mean.matrix().row(0).array()).rowwise() /
                           stats.stddev.matrix().row(0).array();
    return out;
}

Tensor denormalize_tokens(const Tensor& tokens, const NormStats& stats) {
    check_channels(tokens, stats, "denormalize");
    Tensor out(tokens.shape());
    out.matrix().array() = (tokens.matrix().array().rowwise() * stats.stddev.matrix().row(0).array()).rowwise() +
                           stats.mean.matrix().row(0).array();
    return out;
}

LatentTrajectory normalize(const LatentTrajectory& latents, const NormStats& stats) {
    if (latents.normalized) throw std::invalid_argument("normalize: latents are already normalized");
    return {normalize_tokens(latents.tokens, stats), true, latents.encoder};
}

LatentTrajectory denormalize(const LatentTrajectory& latents, const NormStats& stats) {
    if (!latents.normalized) throw std::invalid_argument("denormalize: latents are not normalized");
    return {denormalize_tokens(latents.tokens, stats), false, latents.encoder};
}

void save_norm_stats(const std::filesystem::path& dir, const NormStats& stats) {
    ParamStore store;
    store.create("mean", stats.mean);
    store.create("stddev", stats.stddev);
    numkit::save_checkpoint(dir, store, {{"kind", "norm-stats"}, {"clamped_channels", stats.clamped_channels}});
}

NormStats load_norm_stats(const std::filesystem::path& dir) {
    const auto meta = numkit::read_checkpoint_meta(dir);
    if (meta.value("kind", "") != "norm-stats") throw numkit::FormatError(dir.string() + ": not a norm-stats checkpoint");
    const ParamStore store = numkit::load_param_store(dir);
    return {store.at("mean").value, store.at("stddev").value, meta.value("clamped_channels", 0)};
}

}  // namespace latentcast::backbones
