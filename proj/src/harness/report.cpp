#include "latentcast/harness/report.hpp"

#include "latentcast/evalkit/metrics.hpp"
#include "latentcast/numkit/io.hpp"
#include "latentcast/readouts/readout.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace latentcast::harness {

using nlohmann::json;

namespace {

constexpr const char* kHeader = "encoder,forecaster,task,metric,value";

// Column order of the CSV and the tables.
const std::vector<std::string> kMetrics{"mean",     "best",          "worst",       "fd",
                                        "fd_self",  "variance_pred", "variance_gt", "trajectories_pred",
                                        "trajectories_gt", "perception", "diversity", "examples"};

std::vector<std::pair<std::string, std::optional<double>>> task_cells(const evalkit::TaskReport& r) {
    return {{"mean", r.mean},
            {"best", r.best},
            {"worst", r.worst},
            {"fd", r.fd},
            {"fd_self", r.fd_self},
            {"variance_pred", r.variance_pred},
            {"variance_gt", r.variance_gt},
            {"trajectories_pred", r.trajectories_pred},
            {"trajectories_gt", r.trajectories_gt},
            {"perception", r.perception},
            {"diversity", r.diversity},
            {"examples", static_cast<double>(r.per_example.size())}};
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

bool higher_better(const std::string& task) { return evalkit::higher_is_better(readouts::parse_task(task)); }

}  // namespace

std::vector<CsvRow> report_rows(std::span<const evalkit::MetricReport> reports) {
    std::vector<CsvRow> rows;
    for (const auto& rep : reports) {
        for (const auto& t : rep.tasks) {
            for (auto& [metric, value] : task_cells(t)) {
                rows.push_back({rep.encoder, rep.forecaster, std::string(readouts::to_string(t.task)), metric, value});
            }
        }
    }
    return rows;
}

std::string format_value(const std::optional<double>& v) {
    if (!v) return "";
    if (std::isnan(*v)) return "nan";
    if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
    return fmt::format("{:.9g}", *v);
}

std::string to_csv(std::span<const CsvRow> rows) {
    std::string out = std::string(kHeader) + "\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{}\n", r.encoder, r.forecaster, r.task, r.metric, format_value(r.value));
    }
    return out;
}

std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kHeader) throw std::invalid_argument("report csv: bad header");
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 5) throw std::invalid_argument(fmt::format("report csv line {}: expected 5 fields", number));
        CsvRow row{f[0], f[1], f[2], f[3], std::nullopt};
        if (!f[4].empty()) {
            try {
                std::size_t used = 0;
                row.value = std::stod(f[4], &used);
                if (used != f[4].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw std::invalid_argument(fmt::format("report csv line {}: bad value '{}'", number, f[4]));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ScatterPoint> scatter_points(std::span<const CsvRow> rows) {
    // task -> encoder -> (perception, best)
    std::map<std::string, std::map<std::string, std::pair<std::optional<double>, std::optional<double>>>> raw;
    for (const auto& r : rows) {
        if (r.forecaster != "diffusion") continue;
        if (r.metric == "perception") raw[r.task][r.encoder].first = r.value;
        if (r.metric == "best") raw[r.task][r.encoder].second = r.value;
    }
    std::vector<ScatterPoint> points;
    for (const auto& [task, encoders] : raw) {
        const bool higher = higher_better(task);
        std::vector<ScatterPoint> task_points;
        for (const auto& [encoder, pair] : encoders) {
            const auto& [p, f] = pair;
            if (!p || !f || !std::isfinite(*p) || !std::isfinite(*f)) continue;
            task_points.push_back({encoder, task, *p, *f});
        }
        if (task_points.empty()) continue;
        // Normalize so the best encoder sits at 1 on each axis.
        auto normalize = [&](double ScatterPoint::*field) {
            double best = task_points.front().*field;
            for (const auto& s : task_points) best = higher ? std::max(best, s.*field) : std::min(best, s.*field);
            for (auto& s : task_points) {
                const double v = s.*field;
                if (higher) {
                    s.*field = best > 0 ? v / best : 0.0;
                } else {
                    s.*field = v > 0 ? best / v : (best == v ? 1.0 : 0.0);
                }
            }
        };
        normalize(&ScatterPoint::perception);
        normalize(&ScatterPoint::forecasting);
        points.insert(points.end(), task_points.begin(), task_points.end());
    }
    return points;
}

std::vector<TaskCorrelation> task_correlations(std::span<const ScatterPoint> points) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_task;
    for (const auto& p : points) {
        by_task[p.task].first.push_back(p.perception);
        by_task[p.task].second.push_back(p.forecasting);
    }
    std::vector<TaskCorrelation> out;
    for (const auto& [task, xy] : by_task) {
        out.push_back({task, static_cast<int>(xy.first.size()), evalkit::correlation(xy.first, xy.second)});
    }
    return out;
}

std::string render_scatter_svg(std::span<const CsvRow> rows) {
    const auto points = scatter_points(rows);
    const auto correlations = task_correlations(points);
    const std::map<std::string, std::string> colors{
        {"pixels", "#1f77b4"}, {"depth", "#d62728"}, {"points", "#2ca02c"}, {"boxes", "#9467bd"}};
    auto color = [&](const std::string& task) {
        const auto it = colors.find(task);
        return it == colors.end() ? std::string("#555555") : it->second;
    };
    // Plot area [0, 1.05] on both axes.
    constexpr double left = 70, top = 30, size = 360, extent = 1.05;
    auto px = [&](double v) { return left + std::clamp(v, 0.0, extent) / extent * size; };
    auto py = [&](double v) { return top + size - std::clamp(v, 0.0, extent) / extent * size; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"460\" font-family=\"sans-serif\" "
         "font-size=\"12\">\n";
    s += "<rect width=\"720\" height=\"460\" fill=\"white\"/>\n";
    s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
                     "stroke=\"black\"/>\n",
                     left, top, size, size);
    for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#dddddd\"/>\n",
                         px(tick), top, px(tick), top + size);
        s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#dddddd\"/>\n",
                         left, py(tick), left + size, py(tick));
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.2f}</text>\n", px(tick),
                         top + size + 16, tick);
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", left - 6,
                         py(tick) + 4, tick);
    }
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">perception (normalized)</text>\n",
                     left + size / 2, top + size + 36);
    s += fmt::format("<text x=\"16\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1f})\">"
                     "forecasting best-of-N (normalized)</text>\n",
                     top + size / 2, top + size / 2);
    for (const auto& p : points) {
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"5\" fill=\"{}\" fill-opacity=\"0.8\">"
                         "<title>{} {}: {:.4f}, {:.4f}</title></circle>\n",
                         px(p.perception), py(p.forecasting), color(p.task), p.encoder, p.task, p.perception,
                         p.forecasting);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"9\">{}</text>\n", px(p.perception) + 7,
                         py(p.forecasting) - 4, p.encoder);
    }
    double y = top + 10;
    for (const auto& c : correlations) {
        auto text = [](const std::optional<double>& v) { return v ? fmt::format("{:.3f}", *v) : std::string("missing"); };
        s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"5\" fill=\"{}\"/>\n", left + size + 30, y - 4,
                         color(c.task));
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{} (n={}): spearman {}, pearson {}</text>\n",
                         left + size + 42, y, c.task, c.encoders, text(c.correlation.spearman),
                         text(c.correlation.pearson));
        y += 20;
    }
    s += "</svg>\n";
    return s;
}

std::string render_tables(std::span<const CsvRow> rows) {
    // task -> (encoder, forecaster) -> metric -> value, in first-seen order.
    std::vector<std::string> tasks;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> keys;
    std::map<std::string, std::map<std::pair<std::string, std::string>, std::map<std::string, std::optional<double>>>>
        cells;
    for (const auto& r : rows) {
        if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
        const auto key = std::make_pair(r.encoder, r.forecaster);
        auto& k = keys[r.task];
        if (std::find(k.begin(), k.end(), key) == k.end()) k.push_back(key);
        cells[r.task][key][r.metric] = r.value;
    }
    std::string out;
    for (const auto& task : tasks) {
        const auto name = evalkit::metric_name(readouts::parse_task(task));
        out += fmt::format("## {} ({}, {} is better)\n\n", task, name, higher_better(task) ? "higher" : "lower");
        out += "| encoder | forecaster |";
        for (const auto& m : kMetrics) out += " " + m + " |";
        out += "\n|---|---|";
        for (std::size_t i = 0; i < kMetrics.size(); ++i) out += "---|";
        out += "\n";
        for (const auto& key : keys[task]) {
            out += fmt::format("| {} | {} |", key.first, key.second);
            const auto& row = cells[task][key];
            for (const auto& m : kMetrics) {
                const auto it = row.find(m);
                const std::string v = it == row.end() || !it->second ? "missing" : format_value(it->second);
                out += " " + v + " |";
            }
            out += "\n";
        }
        out += "\n";
    }
    return out;
}

void write_report(std::span<const evalkit::MetricReport> reports, const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    const std::string csv = to_csv(report_rows(reports));
    numkit::write_text_file(out / "report.csv", csv);
    // Plots and tables are built from the parsed CSV so they depend only on it.
    const auto rows = parse_csv(csv);
    numkit::write_text_file(out / "tables.md", render_tables(rows));
    numkit::write_text_file(out / "scatter.svg", render_scatter_svg(rows));
    json j = json::array();
    for (const auto& r : reports) j.push_back(r);
    json corr = json::array();
    for (const auto& c : task_correlations(scatter_points(rows))) {
        corr.push_back({{"task", c.task},
                        {"encoders", c.encoders},
                        {"spearman", c.correlation.spearman ? json(*c.correlation.spearman) : json(nullptr)},
                        {"pearson", c.correlation.pearson ? json(*c.correlation.pearson) : json(nullptr)}});
    }
    numkit::write_text_file(out / "report.json", json{{"reports", j}, {"correlations", corr}}.dump(2) + "\n");
}

}  // namespace latentcast::harness
