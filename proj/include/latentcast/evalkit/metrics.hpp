#pragma once

#include "latentcast/readouts/readout.hpp"

#include <optional>

namespace latentcast::evalkit {

using numkit::Tensor;
using readouts::Task;

/// Tables and aggregates cap PSNR here; psnr() itself returns +inf on a perfect match.
inline constexpr double kPsnrCapDb = 99.0;
/// Average Jaccard thresholds in pixels at the 256 px reference width.
inline constexpr std::array<double, 5> kJaccardThresholds{1.0, 2.0, 4.0, 8.0, 16.0};
inline constexpr double kJaccardReferenceWidth = 256.0;

/// PSNR for PSNR and IoU and Average Jaccard; abs-rel for depth.
bool higher_is_better(Task task);
std::string_view metric_name(Task task);

/// 10 log10(1 / MSE) over every value. Throws std::invalid_argument on shape mismatch.
double psnr(const Tensor& pred, const Tensor& gt);

/// Mean |pred - gt| / gt. Throws std::invalid_argument on shape mismatch or gt <= 0.
double abs_rel(const Tensor& pred, const Tensor& gt);

struct Box {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

/// Zero when the union is empty.
double iou(const Box& a, const Box& b);

/// pred [K, T, 4] corners, gt [K, T, 5] with the present flag last. Mean IoU
/// over (object, frame) pairs where gt is present; nullopt if there are none.
std::optional<double> track_iou(const Tensor& pred, const Tensor& gt);

/// pred [Q, T, 4] = x, y, visibility logit, uncertainty logit; gt [Q, T, 3] =
/// x, y, visible. A point is predicted visible when its logit is positive.
/// Thresholds are kJaccardThresholds scaled by image_width / 256. nullopt if
/// no gt point is visible.
std::optional<double> average_jaccard(const Tensor& pred, const Tensor& gt, double image_width);

/// Frames [first, first + count) of a task output or target, along the time
/// axis of its layout (axis 0 for dense tasks, axis 1 for points and boxes).
Tensor slice_frames(const Tensor& values, Task task, int first, int count);

/// The per-example task metric on matching pred/gt windows. PSNR is capped at
/// kPsnrCapDb. nullopt when the metric is undefined for this example.
std::optional<double> task_metric(Task task, const Tensor& pred, const Tensor& gt, double image_width);

}  // namespace latentcast::evalkit
