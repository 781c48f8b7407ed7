#include "latentcast/evalkit/vectorize.hpp"

namespace latentcast::evalkit {

namespace {

// Row i averages the source samples overlapping [i * n / grid, (i + 1) * n / grid).
Eigen::MatrixXd overlap_weights(int n, int grid) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(grid, n);
    const double cell = static_cast<double>(n) / grid;
    for (int i = 0; i < grid; ++i) {
        const double lo = i * cell, hi = (i + 1) * cell;
        for (int k = static_cast<int>(lo); k < n && k < hi; ++k) {
            w(i, k) = std::min<double>(k + 1, hi) - std::max<double>(k, lo);
        }
        w.row(i) /= cell;
    }
    return w;
}

}  // namespace

int coords_per_frame(Task task) {
    switch (task) {
        case Task::points: return 2;
        case Task::boxes: return 4;
        case Task::pixels:
        case Task::depth: return kPoolGrid * kPoolGrid;
    }
    throw std::invalid_argument("coords_per_frame: bad task");
}

int trajectory_dim(Task task) { return coords_per_frame(task) * kTrajectoryFrames; }

Eigen::MatrixXd pool_grid(const Eigen::MatrixXd& frame, int grid) {
    if (grid < 1 || frame.rows() < 1 || frame.cols() < 1) throw std::invalid_argument("pool_grid: empty grid or frame");
    return overlap_weights(static_cast<int>(frame.rows()), grid) * frame *
           overlap_weights(static_cast<int>(frame.cols()), grid).transpose();
}

std::vector<TrajectoryVector> vectorize(Task task, const Tensor& window) {
    const bool dense = task == Task::pixels || task == Task::depth;
    const int axis = dense ? 0 : 1;
    if (window.rank() < 2 || window.dim(axis) != kTrajectoryFrames) {
        throw std::invalid_argument("vectorize: expected a " + std::to_string(kTrajectoryFrames) +
                                    "-frame window, got shape " + numkit::to_string(window.shape()));
    }
    std::vector<TrajectoryVector> out;
    if (dense) {
        const int rank = task == Task::pixels ? 4 : 3;
        if (window.rank() != rank || (task == Task::pixels && window.dim(3) != 3)) {
            throw std::invalid_argument("vectorize: bad dense layout " + numkit::to_string(window.shape()));
        }
        const auto h = window.dim(1), w = window.dim(2);
        const std::int64_t channels = task == Task::pixels ? 3 : 1;
        TrajectoryVector tv{task, Eigen::VectorXd(trajectory_dim(task)), true};
        const int per = coords_per_frame(task);
        for (int t = 0; t < kTrajectoryFrames; ++t) {
            Eigen::MatrixXd frame(h, w);
            const float* src = window.ptr() + t * h * w * channels;
            for (std::int64_t i = 0; i < h * w; ++i) {
                double v = 0.0;
                for (std::int64_t c = 0; c < channels; ++c) v += src[i * channels + c];
                frame(i / w, i % w) = v / static_cast<double>(channels);
            }
            const Eigen::MatrixXd pooled = pool_grid(frame, kPoolGrid);
            for (int r = 0; r < kPoolGrid; ++r) {
                for (int c = 0; c < kPoolGrid; ++c) tv.values(t * per + r * kPoolGrid + c) = pooled(r, c);
            }
        }
        out.push_back(std::move(tv));
        return out;
    }
    const std::int64_t cols = window.dim(2);
    const int coords = coords_per_frame(task);
    // Predictions carry 4 columns; targets add a flag column.
    const bool target = task == Task::points ? cols == 3 : cols == 5;
    if (window.rank() != 3 || (task == Task::points && cols != 3 && cols != 4) || (task == Task::boxes && cols != 4 && cols != 5)) {
        throw std::invalid_argument("vectorize: bad track layout " + numkit::to_string(window.shape()));
    }
    for (std::int64_t r = 0; r < window.dim(0); ++r) {
        TrajectoryVector tv{task, Eigen::VectorXd(trajectory_dim(task)), true};
        for (int t = 0; t < kTrajectoryFrames; ++t) {
            const float* row = window.ptr() + (r * kTrajectoryFrames + t) * cols;
            for (int c = 0; c < coords; ++c) tv.values(t * coords + c) = row[c];
            if (task == Task::points) {
                tv.complete &= target ? row[2] > 0.5f : row[2] > 0.0f;
            } else if (target) {
                tv.complete &= row[4] > 0.5f;
            }
        }
        out.push_back(std::move(tv));
    }
    return out;
}

std::vector<TrajectoryVector> filter_complete(std::vector<TrajectoryVector> trajectories) {
    std::erase_if(trajectories, [](const TrajectoryVector& t) { return !t.complete; });
    return trajectories;
}

}  // namespace latentcast::evalkit
