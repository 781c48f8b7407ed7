#include "latentcast/harness/pipeline.hpp"
#include "latentcast/harness/report.hpp"
#include "latentcast/numkit/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace latentcast::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

evalkit::TaskReport task_report(Task t, double best, double perception) {
    evalkit::TaskReport r;
    r.task = t;
    r.mean = best * 0.9;
    r.best = best;
    r.worst = best * 0.8;
    r.fd = 1.5;
    r.perception = perception;
    return r;
}

evalkit::MetricReport metric_report(const std::string& encoder, double scale) {
    evalkit::MetricReport m;
    m.encoder = encoder;
    m.forecaster = "diffusion";
    m.samples = 10;
    m.tasks = {task_report(Task::pixels, 20 * scale, 25 * scale), task_report(Task::depth, 0.2 / scale, 0.1 / scale),
               task_report(Task::points, 0.3 * scale, 0.5 * scale), task_report(Task::boxes, 0.4 * scale, 0.6 * scale)};
    return m;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("latentcast_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

TEST(Config, JsonRoundTrip) {
    RunConfig c;
    c.data.eval_worlds = 5;
    c.encoders = {Variant::video_mae, Variant::image_mae};
    c.samples = 3;
    c.forecaster.train_steps = 17;
    const json j = c;
    const RunConfig back = j.get<RunConfig>();
    EXPECT_EQ(json(back), j);
    EXPECT_EQ(content_key(json(back)), content_key(j));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    json j = RunConfig{};
    j["sampels"] = 3;
    EXPECT_THROW(j.get<RunConfig>(), std::invalid_argument);
    RunConfig c;
    c.samples = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = RunConfig{};
    c.regression = {Variant::image_mae};
    c.encoders = {Variant::video_mae};
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, SeedsDifferPerVariantAndTask) {
    const RunConfig c;
    EXPECT_NE(encoder_spec(c, Variant::image_mae).seed, encoder_spec(c, Variant::video_mae).seed);
    EXPECT_NE(readout_spec(c, Variant::video_mae, Task::points).seed, readout_spec(c, Variant::video_mae, Task::boxes).seed);
    EXPECT_NE(readout_spec(c, Variant::image_mae, Task::points).seed, readout_spec(c, Variant::video_mae, Task::points).seed);
}

TEST(Csv, RoundTripKeepsMissingCells) {
    auto m = metric_report("video-mae", 1.0);
    m.tasks[2].fd.reset();
    const std::vector<evalkit::MetricReport> reports{m};
    const auto rows = report_rows(reports);
    const std::string csv = to_csv(rows);
    const auto parsed = parse_csv(csv);
    ASSERT_EQ(parsed.size(), rows.size());
    EXPECT_EQ(to_csv(parsed), csv);
    bool saw_missing = false;
    for (const auto& r : parsed) {
        if (r.task == "points" && r.metric == "fd") {
            EXPECT_FALSE(r.value.has_value());
            saw_missing = true;
        }
    }
    EXPECT_TRUE(saw_missing);
}

TEST(Csv, OneRowPerEncoderTaskMetric) {
    const std::vector<evalkit::MetricReport> reports{metric_report("a", 1.0), metric_report("b", 0.5)};
    const auto rows = report_rows(reports);
    std::set<std::tuple<std::string, std::string, std::string, std::string>> keys;
    for (const auto& r : rows) EXPECT_TRUE(keys.emplace(r.encoder, r.forecaster, r.task, r.metric).second);
}

TEST(Csv, RejectsMalformedInput) {
    EXPECT_THROW(parse_csv("a,b\n"), std::invalid_argument);
    EXPECT_THROW(parse_csv("encoder,forecaster,task,metric,value\nx,y,z\n"), std::invalid_argument);
    EXPECT_THROW(parse_csv("encoder,forecaster,task,metric,value\nx,y,pixels,fd,1.5q\n"), std::invalid_argument);
}

TEST(Scatter, BestEncoderMapsToOne) {
    const std::vector<evalkit::MetricReport> reports{metric_report("a", 1.0), metric_report("b", 0.5),
                                                     metric_report("c", 0.8)};
    const auto rows = report_rows(reports);
    const auto points = scatter_points(rows);
    ASSERT_EQ(points.size(), 12u);
    for (const auto& p : points) {
        if (p.encoder == "a") {
            EXPECT_DOUBLE_EQ(p.perception, 1.0) << p.task;
            EXPECT_DOUBLE_EQ(p.forecasting, 1.0) << p.task;
        } else {
            EXPECT_LT(p.perception, 1.0);
            EXPECT_LT(p.forecasting, 1.0);
        }
        if (p.encoder == "b") {
            // Higher-is-better divides by the best; depth takes best / value.
            EXPECT_NEAR(p.forecasting, 0.5, 1e-12) << p.task;
        }
    }
    for (const auto& c : task_correlations(points)) {
        EXPECT_EQ(c.encoders, 3);
        ASSERT_TRUE(c.correlation.spearman.has_value());
        EXPECT_NEAR(*c.correlation.spearman, 1.0, 1e-12);
    }
}

TEST(Scatter, SingleEncoderMarksCorrelationMissing) {
    const std::vector<evalkit::MetricReport> reports{metric_report("only", 1.0)};
    const auto rows = report_rows(reports);
    const auto points = scatter_points(rows);
    EXPECT_EQ(points.size(), 4u);
    const auto corr = task_correlations(points);
    ASSERT_EQ(corr.size(), 4u);
    for (const auto& c : corr) {
        EXPECT_FALSE(c.correlation.spearman.has_value());
        EXPECT_FALSE(c.correlation.pearson.has_value());
    }
    const std::string svg = render_scatter_svg(rows);
    EXPECT_NE(svg.find("spearman missing"), std::string::npos);
}

TEST(Scatter, SvgIsByteIdenticalFromSameCsv) {
    const std::vector<evalkit::MetricReport> reports{metric_report("a", 1.0), metric_report("b", 0.7),
                                                     metric_report("c", 0.9), metric_report("d", 0.4)};
    const std::string csv = to_csv(report_rows(reports));
    const std::string first = render_scatter_svg(parse_csv(csv));
    const std::string second = render_scatter_svg(parse_csv(csv));
    EXPECT_EQ(first, second);
    EXPECT_EQ(first.rfind("<svg", 0), 0u);
}

TEST(Tables, MissingCellsAreMarked) {
    auto m = metric_report("a", 1.0);
    m.tasks[0].perception.reset();
    const std::vector<evalkit::MetricReport> reports{m};
    const std::string md = render_tables(report_rows(reports));
    EXPECT_NE(md.find("## pixels"), std::string::npos);
    EXPECT_NE(md.find("missing"), std::string::npos);
}

TEST(Manifest, DigestsSkipStageMarker) {
    const fs::path dir = fresh_dir("digests");
    numkit::write_text_file(dir / "a.txt", "a");
    numkit::write_text_file(dir / "sub" / "b.txt", "b");
    const auto before = file_digests(dir);
    numkit::write_text_file(dir / kStageMarker, "{}");
    EXPECT_EQ(file_digests(dir), before);
    EXPECT_EQ(before.size(), 2u);
    EXPECT_TRUE(before.contains("sub/b.txt"));
    numkit::write_text_file(dir / "a.txt", "changed");
    EXPECT_NE(dir_digest(dir), numkit::sha256_hex(json(before).dump()));
    fs::remove_all(dir);
}

RunConfig tiny_config(const fs::path& out) {
    RunConfig c;
    c.world.height = 32;
    c.world.width = 32;
    c.world.objects = 2;
    c.world.size_min = 6;
    c.world.size_max = 9;
    c.world.tracked_points = 4;
    c.data = {5, 6, 4, 2, 2};
    c.encoders = {Variant::video_mae};
    c.regression = {Variant::video_mae};
    c.encoder.pretrain_steps = 4;
    c.encoder.dim = 32;
    c.encoder.depth = 1;
    c.encoder.heads = 2;
    c.readout.steps = 4;
    c.readout.width = 32;
    c.readout.heads = 2;
    c.forecaster.train_steps = 4;
    c.forecaster.schedule_steps = 30;
    c.forecaster.denoiser.max_step = 30;
    c.forecaster.denoiser.depth = 1;
    c.forecaster.denoiser.width = 32;
    c.forecaster.denoiser.heads = 2;
    c.forecaster.denoiser.time_dim = 16;
    c.samples = 2;
    c.out = out;
    return c;
}

TEST(Pipeline, ResumesAfterReportDeletion) {
    const fs::path out = fresh_dir("pipeline");
    Pipeline first(tiny_config(out));
    const RunManifest m1 = first.run();
    ASSERT_TRUE(m1.failed_stage.empty()) << m1.error;
    const fs::path report_dir = first.report();
    const std::string csv = numkit::read_text_file(report_dir / "report.csv");
    EXPECT_FALSE(csv.empty());

    // Every encoder and readout is unchanged after the downstream stages.
    ASSERT_FALSE(m1.frozen_checks.empty());
    for (const auto& [dir, check] : m1.frozen_checks.items()) EXPECT_TRUE(check.at("ok").get<bool>()) << dir;
    // Training stages never opened the eval split.
    for (const auto& s : m1.stages) {
        if (s.name == "train-encoder" || s.name == "train-readout" || s.name == "train-forecaster") {
            for (const auto& r : s.reads) EXPECT_EQ(r.find("/eval/"), std::string::npos) << s.name << " " << r;
        }
    }

    fs::remove_all(report_dir);
    Pipeline second(tiny_config(out));
    const RunManifest m2 = second.run();
    int reran = 0;
    for (const auto& s : m2.stages) {
        if (!s.resumed) {
            ++reran;
            EXPECT_EQ(s.name, "report");
        }
    }
    EXPECT_EQ(reran, 1);
    EXPECT_EQ(numkit::read_text_file(report_dir / "report.csv"), csv);
    EXPECT_EQ(RunManifest::load(second.manifest_path()).stages.size(), m2.stages.size());
    fs::remove_all(out);
}

TEST(Pipeline, TamperedArtifactIsRebuilt) {
    const fs::path out = fresh_dir("tamper");
    Pipeline p(tiny_config(out));
    const fs::path enc = p.encoder(Variant::video_mae);
    const auto digests = file_digests(enc);
    numkit::write_text_file(enc / "junk.txt", "x");
    Pipeline q(tiny_config(out));
    EXPECT_EQ(q.encoder(Variant::video_mae), enc);
    EXPECT_FALSE(q.manifest().stages.back().resumed);
    EXPECT_EQ(file_digests(enc), digests);
    fs::remove_all(out);
}

TEST(Pipeline, FailureIsRecorded) {
    const fs::path out = fresh_dir("failure");
    Pipeline p(tiny_config(out));
    const fs::path data = p.generate();
    // An emptied data directory whose marker still matches its (empty)
    // contents is accepted, and the encoder stage then fails to read it.
    fs::remove_all(data);
    fs::create_directories(data);
    numkit::write_text_file(data / kStageMarker, json{{"outputs", json::object()}}.dump());
    Pipeline q(tiny_config(out));
    EXPECT_THROW(q.encoder(Variant::video_mae), StageError);
    const RunManifest m = RunManifest::load(q.manifest_path());
    EXPECT_NE(m.failed_stage.find("train-encoder"), std::string::npos);
    EXPECT_FALSE(m.error.empty());
    fs::remove_all(out);
}

}  // namespace
}  // namespace latentcast::harness
