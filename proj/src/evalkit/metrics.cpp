#include "latentcast/evalkit/metrics.hpp"

#include <cmath>
#include <limits>

namespace latentcast::evalkit {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw numkit::ShapeError(op, a.shape(), b.shape());
}

void require_track_layout(const char* op, const Tensor& pred, const Tensor& gt, std::int64_t gt_cols) {
    if (pred.rank() != 3 || gt.rank() != 3 || pred.dim(2) != 4 || gt.dim(2) != gt_cols || pred.dim(0) != gt.dim(0) ||
        pred.dim(1) != gt.dim(1)) {
        throw numkit::ShapeError(op, pred.shape(), gt.shape());
    }
}

}  // namespace

bool higher_is_better(Task task) { return task != Task::depth; }

std::string_view metric_name(Task task) {
    switch (task) {
        case Task::pixels: return "psnr";
        case Task::depth: return "abs_rel";
        case Task::points: return "average_jaccard";
        case Task::boxes: return "iou";
    }
    throw std::invalid_argument("metric_name: bad task");
}

double psnr(const Tensor& pred, const Tensor& gt) {
    require_same_shape("psnr", pred, gt);
    if (pred.empty()) throw std::invalid_argument("psnr: empty input");
    const double mse = (pred.array().cast<double>() - gt.array().cast<double>()).square().mean();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double abs_rel(const Tensor& pred, const Tensor& gt) {
    require_same_shape("abs_rel", pred, gt);
    if (pred.empty()) throw std::invalid_argument("abs_rel: empty input");
    if ((gt.array() <= 0.0f).any()) throw std::invalid_argument("abs_rel: ground-truth depth must be positive");
    const auto g = gt.array().cast<double>();
    return ((pred.array().cast<double>() - g).abs() / g).mean();
}

double iou(const Box& a, const Box& b) {
    const double w = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double h = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = w * h;
    const double area_a = std::max(0.0, a.x_max - a.x_min) * std::max(0.0, a.y_max - a.y_min);
    const double area_b = std::max(0.0, b.x_max - b.x_min) * std::max(0.0, b.y_max - b.y_min);
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::optional<double> track_iou(const Tensor& pred, const Tensor& gt) {
    require_track_layout("track_iou", pred, gt, 5);
    double total = 0.0;
    std::int64_t count = 0;
    for (std::int64_t r = 0; r < pred.rows(); ++r) {
        const float* g = gt.ptr() + r * 5;
        if (g[4] <= 0.5f) continue;
        const float* p = pred.ptr() + r * 4;
        total += iou({p[0], p[1], p[2], p[3]}, {g[0], g[1], g[2], g[3]});
        ++count;
    }
    if (count == 0) return std::nullopt;
    return total / static_cast<double>(count);
}

std::optional<double> average_jaccard(const Tensor& pred, const Tensor& gt, double image_width) {
    require_track_layout("average_jaccard", pred, gt, 3);
    const double scale = image_width / kJaccardReferenceWidth;
    std::int64_t visible = 0;
    for (std::int64_t r = 0; r < gt.rows(); ++r) visible += gt[r * 3 + 2] > 0.5f;
    if (visible == 0) return std::nullopt;
    double total = 0.0;
    for (double threshold : kJaccardThresholds) {
        const double delta = threshold * scale;
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (std::int64_t r = 0; r < gt.rows(); ++r) {
            const float* p = pred.ptr() + r * 4;
            const float* g = gt.ptr() + r * 3;
            const bool pred_vis = p[2] > 0.0f;
            const bool gt_vis = g[2] > 0.5f;
            const bool close = std::hypot(double(p[0]) - g[0], double(p[1]) - g[1]) <= delta;
            tp += pred_vis && gt_vis && close;
            fp += pred_vis && (!gt_vis || !close);
            fn += gt_vis && (!pred_vis || !close);
        }
        total += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
    return total / static_cast<double>(kJaccardThresholds.size());
}

Tensor slice_frames(const Tensor& values, Task task, int first, int count) {
    const bool dense = task == Task::pixels || task == Task::depth;
    const int axis = dense ? 0 : 1;
    if (values.rank() < axis + 1 || first < 0 || count < 0 || first + count > values.dim(axis)) {
        throw std::invalid_argument("slice_frames: window [" + std::to_string(first) + ", " +
                                    std::to_string(first + count) + ") outside shape " +
                                    numkit::to_string(values.shape()));
    }
    numkit::Shape shape = values.shape();
    shape[static_cast<std::size_t>(axis)] = count;
    Tensor out(shape);
    const std::int64_t outer = dense ? 1 : values.dim(0);
    const std::int64_t frames = values.dim(axis);
    const std::int64_t inner = values.size() / (outer * frames);
    for (std::int64_t o = 0; o < outer; ++o) {
        std::copy_n(values.ptr() + (o * frames + first) * inner, count * inner, out.ptr() + o * count * inner);
    }
    return out;
}

std::optional<double> task_metric(Task task, const Tensor& pred, const Tensor& gt, double image_width) {
    switch (task) {
        case Task::pixels: return std::min(psnr(pred, gt), kPsnrCapDb);
        case Task::depth: return abs_rel(pred, gt);
        case Task::points: return average_jaccard(pred, gt, image_width);
        case Task::boxes: return track_iou(pred, gt);
    }
    throw std::invalid_argument("task_metric: bad task");
}

}  // namespace latentcast::evalkit
