#pragma once

#include "latentcast/evalkit/gaussian.hpp"
#include "latentcast/evalkit/stats.hpp"

#include <json.hpp>

namespace latentcast::evalkit {

inline constexpr double kDiversityPx = 2.0;

/// Forecast metrics for one (encoder, forecaster, task).
struct TaskReport {
    Task task = Task::pixels;
    /// One entry per eval example whose metric is defined on every sample.
    std::vector<SampleStats> per_example;
    /// Means over examples of the per-example mean, best and worst sample.
    std::optional<double> mean, best, worst;
    std::optional<double> fd;
    /// FD between two disjoint halves of the ground-truth population, the
    /// floor any forecaster is measured against.
    std::optional<double> fd_self;
    /// Temporal variance of complete predicted and ground-truth trajectories.
    std::optional<double> variance_pred, variance_gt;
    int trajectories_pred = 0;
    int trajectories_gt = 0;
    /// Task metric of the readout on encoded (observed) frames.
    std::optional<double> perception;
    /// Boxes: fraction of examples whose samples hold two frame-16 box
    /// centres more than kDiversityPx apart.
    std::optional<double> diversity;
};

struct MetricReport {
    std::string encoder;
    std::string forecaster;
    int samples = 0;
    std::vector<TaskReport> tasks;

    const TaskReport* find(Task task) const;
};

/// Per-example sample metrics, in eval order; an example with any undefined
/// sample metric is skipped.
void summarize_examples(TaskReport& report, std::span<const std::vector<std::optional<double>>> sample_metrics);

/// Fills fd, variances and trajectory counts from the complete trajectories
/// of predictions and ground truth. gt_fit, when given, must be
/// fit_trajectories(ground_truth). Anything undefined stays nullopt.
void summarize_distribution(TaskReport& report, std::span<const TrajectoryVector> predicted,
                            std::span<const TrajectoryVector> ground_truth,
                            const GaussianSummary<double>* gt_fit = nullptr);

/// Ground-truth trajectories as a GaussianSummary, or nullopt with < 2 rows.
/// with_sqrt caches the covariance root, needed only on the first FD argument.
std::optional<GaussianSummary<double>> fit_trajectories(std::span<const TrajectoryVector> trajectories,
                                                        bool with_sqrt = true);

void to_json(nlohmann::json& j, const SampleStats& s);
void to_json(nlohmann::json& j, const TaskReport& r);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, SampleStats& s);
void from_json(const nlohmann::json& j, TaskReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

}  // namespace latentcast::evalkit
