#pragma once

#include "latentcast/evalkit/report.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace latentcast::harness {

/// One (encoder, forecaster, task, metric) cell. Missing values are empty.
struct CsvRow {
    std::string encoder;
    std::string forecaster;
    std::string task;
    std::string metric;
    std::optional<double> value;
};

std::vector<CsvRow> report_rows(std::span<const evalkit::MetricReport> reports);
std::string format_value(const std::optional<double>& v);
std::string to_csv(std::span<const CsvRow> rows);
/// Inverse of to_csv. Throws std::invalid_argument on a malformed line.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Per task, over the diffusion rows: forecasting "best" against perception,
/// each oriented so higher is better and divided by the best encoder.
struct ScatterPoint {
    std::string encoder;
    std::string task;
    double perception = 0;
    double forecasting = 0;
};

struct TaskCorrelation {
    std::string task;
    int encoders = 0;
    evalkit::Correlation correlation;
};

std::vector<ScatterPoint> scatter_points(std::span<const CsvRow> rows);
std::vector<TaskCorrelation> task_correlations(std::span<const ScatterPoint> points);

std::string render_scatter_svg(std::span<const CsvRow> rows);
/// Markdown tables: per task, one row per (encoder, forecaster).
std::string render_tables(std::span<const CsvRow> rows);

/// Writes report.csv, report.json, tables.md and scatter.svg to `out`.
void write_report(std::span<const evalkit::MetricReport> reports, const std::filesystem::path& out);

}  // namespace latentcast::harness
