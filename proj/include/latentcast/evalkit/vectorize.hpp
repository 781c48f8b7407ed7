#pragma once

#include "latentcast/evalkit/metrics.hpp"

#include <Eigen/Core>

namespace latentcast::evalkit {

/// Dense frames are average-pooled to this grid whatever the image size.
inline constexpr int kPoolGrid = 14;
inline constexpr int kTrajectoryFrames = 12;

/// Values per frame in a trajectory vector: 2, 4 or 14 * 14.
int coords_per_frame(Task task);
/// 24, 48 or 2352.
int trajectory_dim(Task task);

/// One trajectory, frame-major: frame t occupies [t * coords, (t + 1) * coords).
struct TrajectoryVector {
    Task task = Task::pixels;
    Eigen::VectorXd values;
    /// False when some frame has an invisible point or an absent box.
    bool complete = true;
};

/// Mean of `frame` over a grid x grid partition with fractional cell edges,
/// weighting pixels by their overlap with each cell.
Eigen::MatrixXd pool_grid(const Eigen::MatrixXd& frame, int grid);

/// Trajectories of one 12-frame window. Predictions (points [Q, 12, 4], boxes
/// [K, 12, 4]) take visibility from the logit and are always present; targets
/// (points [Q, 12, 3], boxes [K, 12, 5]) use their flags. Pixels are averaged
/// over channels before pooling. Throws std::invalid_argument if the window is
/// not 12 frames.
std::vector<TrajectoryVector> vectorize(Task task, const Tensor& window);

/// Drops incomplete trajectories, preserving order.
std::vector<TrajectoryVector> filter_complete(std::vector<TrajectoryVector> trajectories);

}  // namespace latentcast::evalkit
