#include "latentcast/evalkit/report.hpp"

#include <algorithm>

namespace latentcast::evalkit {

const TaskReport* MetricReport::find(Task task) const {
    for (const auto& t : tasks) {
        if (t.task == task) return &t;
    }
    return nullptr;
}

void summarize_examples(TaskReport& report, std::span<const std::vector<std::optional<double>>> sample_metrics) {
    report.per_example.clear();
    const bool higher = higher_is_better(report.task);
    double mean = 0.0, best = 0.0, worst = 0.0;
    std::vector<double> values;
    for (const auto& samples : sample_metrics) {
        if (samples.empty() || std::any_of(samples.begin(), samples.end(), [](const auto& v) { return !v; })) continue;
        values.clear();
        for (const auto& v : samples) values.push_back(*v);
        const SampleStats s = per_example_stats(values);
        report.per_example.push_back(s);
        mean += s.mean;
        best += higher ? s.max : s.min;
        worst += higher ? s.min : s.max;
    }
    if (report.per_example.empty()) {
        report.mean = report.best = report.worst = std::nullopt;
        return;
    }
    const auto n = static_cast<double>(report.per_example.size());
    report.mean = mean / n;
    report.best = best / n;
    report.worst = worst / n;
}

std::optional<GaussianSummary<double>> fit_trajectories(std::span<const TrajectoryVector> trajectories, bool with_sqrt) {
    if (trajectories.size() < 2) return std::nullopt;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(trajectories.size()), trajectories.front().values.size());
    for (std::size_t i = 0; i < trajectories.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = trajectories[i].values.transpose();
    auto g = fit_gaussian<double>(rows);
    if (with_sqrt) prepare_sqrt(g);
    return g;
}

void summarize_distribution(TaskReport& report, std::span<const TrajectoryVector> predicted,
                            std::span<const TrajectoryVector> ground_truth, const GaussianSummary<double>* gt_fit) {
    const auto pred = filter_complete({predicted.begin(), predicted.end()});
    const auto gt = filter_complete({ground_truth.begin(), ground_truth.end()});
    report.trajectories_pred = static_cast<int>(pred.size());
    report.trajectories_gt = static_cast<int>(gt.size());
    report.variance_pred = pred.empty() ? std::nullopt : std::optional(temporal_variance(pred));
    report.variance_gt = gt.empty() ? std::nullopt : std::optional(temporal_variance(gt));
    report.fd = std::nullopt;
    std::optional<GaussianSummary<double>> own;
    if (gt_fit == nullptr) {
        own = fit_trajectories(gt);
        if (own) gt_fit = &*own;
    }
    if (gt_fit == nullptr || pred.size() < 2) return;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(pred.size()), pred.front().values.size());
    for (std::size_t i = 0; i < pred.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = pred[i].values.transpose();
    report.fd = frechet_distance(*gt_fit, fit_gaussian<double>(rows));
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_value(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const SampleStats& s) {
    j = {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"count", s.count}};
}

void to_json(nlohmann::json& j, const TaskReport& r) {
    j = {{"task", readouts::to_string(r.task)},
         {"metric", metric_name(r.task)},
         {"higher_is_better", higher_is_better(r.task)},
         {"mean", optional_json(r.mean)},
         {"best", optional_json(r.best)},
         {"worst", optional_json(r.worst)},
         {"fd", optional_json(r.fd)},
         {"fd_self", optional_json(r.fd_self)},
         {"variance_pred", optional_json(r.variance_pred)},
         {"variance_gt", optional_json(r.variance_gt)},
         {"trajectories_pred", r.trajectories_pred},
         {"trajectories_gt", r.trajectories_gt},
         {"perception", optional_json(r.perception)},
         {"diversity", optional_json(r.diversity)},
         {"per_example", r.per_example}};
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = {{"encoder", r.encoder}, {"forecaster", r.forecaster}, {"samples", r.samples}, {"tasks", r.tasks}};
}

void from_json(const nlohmann::json& j, SampleStats& s) {
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    s.min = j.at("min").get<double>();
    s.max = j.at("max").get<double>();
    s.count = j.at("count").get<int>();
}

void from_json(const nlohmann::json& j, TaskReport& r) {
    r.task = readouts::parse_task(j.at("task").get<std::string>());
    r.mean = optional_value(j, "mean");
    r.best = optional_value(j, "best");
    r.worst = optional_value(j, "worst");
    r.fd = optional_value(j, "fd");
    r.fd_self = optional_value(j, "fd_self");
    r.variance_pred = optional_value(j, "variance_pred");
    r.variance_gt = optional_value(j, "variance_gt");
    r.trajectories_pred = j.value("trajectories_pred", 0);
    r.trajectories_gt = j.value("trajectories_gt", 0);
    r.perception = optional_value(j, "perception");
    r.diversity = optional_value(j, "diversity");
    r.per_example = j.value("per_example", std::vector<SampleStats>{});
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    r.encoder = j.at("encoder").get<std::string>();
    r.forecaster = j.at("forecaster").get<std::string>();
    r.samples = j.at("samples").get<int>();
    r.tasks = j.at("tasks").get<std::vector<TaskReport>>();
}

}  // namespace latentcast::evalkit
