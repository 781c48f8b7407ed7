#include "latentcast/evalkit/report.hpp"

#include "support/metric_oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace latentcast;
using evalkit::Task;
using evalkit::TrajectoryVector;
using numkit::Rng;
using numkit::Tensor;
namespace oracle = latentcast::testing;

namespace {

Tensor uniform_tensor(Rng& rng, numkit::Shape shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (auto& x : t.data()) x = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

evalkit::GaussianSummary<double> gaussian(const Eigen::VectorXd& m, const Eigen::MatrixXd& s) {
    return evalkit::make_gaussian<double>(m, s);
}

// Random points: pred [Q, T, 4], gt [Q, T, 3] with positions near each other.
std::pair<Tensor, Tensor> random_tracks(Rng& rng, int q, int t, double width) {
    Tensor pred({q, t, 4}), gt({q, t, 3});
    for (std::int64_t r = 0; r < q * t; ++r) {
        gt[3 * r] = static_cast<float>(rng.uniform(0, width));
        gt[3 * r + 1] = static_cast<float>(rng.uniform(0, width));
        gt[3 * r + 2] = rng.uniform() < 0.8 ? 1.0f : 0.0f;
        const double spread = std::exp(rng.uniform(-3.0, 2.5));
        pred[4 * r] = static_cast<float>(gt[3 * r] + spread * rng.normal());
        pred[4 * r + 1] = static_cast<float>(gt[3 * r + 1] + spread * rng.normal());
        pred[4 * r + 2] = static_cast<float>(rng.normal() + 1.0);
        pred[4 * r + 3] = 0.0f;
    }
    return {pred, gt};
}

TrajectoryVector trajectory(Task task, Eigen::VectorXd values, bool complete = true) {
    return {task, std::move(values), complete};
}

}  // namespace

TEST(Psnr, IdenticalInputsAreInfinite) {
    const Tensor a({2, 4, 4, 3}, 0.3f);
    EXPECT_EQ(evalkit::psnr(a, a), std::numeric_limits<double>::infinity());
    EXPECT_EQ(evalkit::task_metric(Task::pixels, a, a, 4).value(), evalkit::kPsnrCapDb);
}

TEST(Psnr, UniformOffsetGivesTwentyDb) {
    const Tensor gt({1, 8, 8, 3}, 0.25f), pred({1, 8, 8, 3}, 0.35f);
    EXPECT_NEAR(evalkit::psnr(pred, gt), 20.0, 1e-5);
}

TEST(Psnr, MatchesTwoPassOracle) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const Tensor a = uniform_tensor(rng, {3, 8, 8, 3}, 0, 1), b = uniform_tensor(rng, {3, 8, 8, 3}, 0, 1);
        EXPECT_LT(rel_err(evalkit::psnr(a, b), oracle::oracle_psnr(a, b)), 1e-6);
    }
    EXPECT_THROW(evalkit::psnr(Tensor({2, 2}), Tensor({2, 3})), std::invalid_argument);
}

TEST(AbsRel, ClosedFormsAndOracle) {
    Rng rng(2);
    const Tensor gt = uniform_tensor(rng, {2, 8, 8}, 1, 10);
    EXPECT_EQ(evalkit::abs_rel(gt, gt), 0.0);
    Tensor scaled = gt;
    for (auto& x : scaled.data()) x *= 1.1f;
    EXPECT_NEAR(evalkit::abs_rel(scaled, gt), 0.1, 1e-6);
    for (int i = 0; i < 100; ++i) {
        const Tensor g = uniform_tensor(rng, {2, 8, 8}, 0.5, 10), p = uniform_tensor(rng, {2, 8, 8}, 0.5, 10);
        EXPECT_LT(rel_err(evalkit::abs_rel(p, g), oracle::oracle_abs_rel(p, g)), 1e-7);
    }
    Tensor bad = gt;
    bad[3] = 0.0f;
    EXPECT_THROW(evalkit::abs_rel(gt, bad), std::invalid_argument);
}

TEST(Iou, ClosedForms) {
    EXPECT_EQ(evalkit::iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
    EXPECT_EQ(evalkit::iou({0, 0, 2, 2}, {3, 3, 4, 4}), 0.0);
    EXPECT_NEAR(evalkit::iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0, 1e-15);
    EXPECT_EQ(evalkit::iou({1, 1, 1, 1}, {1, 1, 1, 1}), 0.0);
}

TEST(Iou, MatchesLatticeCount) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto a = oracle::random_lattice_box(rng, 40), b = oracle::random_lattice_box(rng, 40);
        const double got = evalkit::iou({a.x0 / 2.0, a.y0 / 2.0, a.x1 / 2.0, a.y1 / 2.0},
                                        {b.x0 / 2.0, b.y0 / 2.0, b.x1 / 2.0, b.y1 / 2.0});
        const double want = oracle::oracle_iou(a, b);
        EXPECT_NEAR(got, want, 1e-6 * std::max(want, 1e-12)) << i;
    }
}

TEST(TrackIou, AveragesPresentFramesOnly) {
    Tensor pred({1, 2, 4}), gt({1, 2, 5});
    const float p[] = {0, 0, 2, 2, 0, 0, 2, 2};
    const float g[] = {1, 1, 3, 3, 1, 0, 0, 9, 9, 0};
    std::copy(std::begin(p), std::end(p), pred.ptr());
    std::copy(std::begin(g), std::end(g), gt.ptr());
    EXPECT_NEAR(evalkit::track_iou(pred, gt).value(), 1.0 / 7.0, 1e-12);
    gt[4] = 0.0f;
    EXPECT_FALSE(evalkit::track_iou(pred, gt).has_value());
}

TEST(AverageJaccard, PerfectAndAllInvisible) {
    Rng rng(4);
    auto [pred, gt] = random_tracks(rng, 5, 3, 64);
    for (std::int64_t r = 0; r < 15; ++r) {
        gt[3 * r + 2] = 1.0f;
        pred[4 * r] = gt[3 * r];
        pred[4 * r + 1] = gt[3 * r + 1];
        pred[4 * r + 2] = 5.0f;
    }
    EXPECT_EQ(evalkit::average_jaccard(pred, gt, 64).value(), 1.0);
    for (std::int64_t r = 0; r < 15; ++r) pred[4 * r + 2] = -5.0f;
    EXPECT_EQ(evalkit::average_jaccard(pred, gt, 64).value(), 0.0);
    for (std::int64_t r = 0; r < 15; ++r) gt[3 * r + 2] = 0.0f;
    EXPECT_FALSE(evalkit::average_jaccard(pred, gt, 64).has_value());
}

TEST(AverageJaccard, HandcraftedThreePointsTwoFrames) {
    // Width 256, so thresholds are 1, 2, 4, 8, 16 px.
    Tensor pred({3, 2, 4}), gt({3, 2, 3});
    const float g[] = {10, 10, 1, 10, 10, 1, 50, 50, 1, 50, 50, 0, 90, 90, 1, 90, 90, 1};
    // errors: 0 | 3 | 1.5 | occluded but predicted visible | 10 | predicted invisible
    const float p[] = {10, 10, 2, 0, 13, 10, 2, 0, 50, 51.5f, 2, 0, 50, 50, 2, 0, 100, 90, 2, 0, 90, 90, -2, 0};
    std::copy(std::begin(g), std::end(g), gt.ptr());
    std::copy(std::begin(p), std::end(p), pred.ptr());
    // delta 1: TP 1, FP 4, FN 4 -> 1/9; delta 2: TP 2 -> 2/8; delta 4: TP 3 -> 3/7;
    // delta 8: 3/7; delta 16: TP 4, FP 1, FN 1 -> 4/6.
    const double expected = (1.0 / 9 + 2.0 / 8 + 3.0 / 7 + 3.0 / 7 + 4.0 / 6) / 5;
    EXPECT_NEAR(evalkit::average_jaccard(pred, gt, 256).value(), expected, 1e-12);
    EXPECT_NEAR(oracle::oracle_average_jaccard(pred, gt, 256), expected, 1e-12);
}

TEST(AverageJaccard, MatchesEnumerationOracle) {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        auto [pred, gt] = random_tracks(rng, 8, 12, 64);
        const auto got = evalkit::average_jaccard(pred, gt, 64);
        ASSERT_TRUE(got.has_value());
        EXPECT_NEAR(*got, oracle::oracle_average_jaccard(pred, gt, 64), 1e-6 * std::max(*got, 1e-9));
    }
}

TEST(SliceFrames, TakesTheTimeAxisOfEachLayout) {
    Tensor dense({16, 2, 2});
    for (std::int64_t i = 0; i < dense.size(); ++i) dense[i] = static_cast<float>(i);
    const Tensor d = evalkit::slice_frames(dense, Task::depth, 4, 12);
    EXPECT_EQ(d.shape(), (numkit::Shape{12, 2, 2}));
    EXPECT_EQ(d[0], 16.0f);
    Tensor tracks({3, 16, 4});
    for (std::int64_t i = 0; i < tracks.size(); ++i) tracks[i] = static_cast<float>(i);
    const Tensor t = evalkit::slice_frames(tracks, Task::points, 4, 12);
    EXPECT_EQ(t.shape(), (numkit::Shape{3, 12, 4}));
    EXPECT_EQ(t[12 * 4], tracks[(16 + 4) * 4]);
    EXPECT_THROW(evalkit::slice_frames(tracks, Task::points, 8, 12), std::invalid_argument);
}

TEST(Vectorize, DimensionsAreFixedByTask) {
    for (auto [h, w] : {std::pair{64, 64}, std::pair{48, 80}, std::pair{14, 14}}) {
        EXPECT_EQ(evalkit::vectorize(Task::pixels, Tensor({12, h, w, 3}))[0].values.size(), 2352);
        EXPECT_EQ(evalkit::vectorize(Task::depth, Tensor({12, h, w}, 1.0f))[0].values.size(), 2352);
    }
    const auto points = evalkit::vectorize(Task::points, Tensor({5, 12, 4}));
    ASSERT_EQ(points.size(), 5u);
    EXPECT_EQ(points[0].values.size(), 24);
    const auto boxes = evalkit::vectorize(Task::boxes, Tensor({3, 12, 5}));
    ASSERT_EQ(boxes.size(), 3u);
    EXPECT_EQ(boxes[0].values.size(), 48);
    EXPECT_THROW(evalkit::vectorize(Task::points, Tensor({5, 16, 4})), std::invalid_argument);
}

TEST(Vectorize, FractionalPoolingMatchesSupersampling) {
    Rng rng(6);
    for (auto [h, w] : {std::pair{64, 64}, std::pair{20, 33}}) {
        Eigen::MatrixXd frame(h, w);
        for (Eigen::Index i = 0; i < frame.size(); ++i) frame.data()[i] = rng.uniform();
        const Eigen::MatrixXd got = evalkit::pool_grid(frame, 14);
        EXPECT_LT((got - oracle::oracle_pool(frame, 14)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(got.mean(), frame.mean(), 1e-12);
    }
}

TEST(Vectorize, PixelsAreChannelAveragedFrameMajor) {
    Tensor rgb({12, 28, 28, 3});
    for (std::int64_t t = 0; t < 12; ++t) {
        for (std::int64_t i = 0; i < 28 * 28; ++i) {
            rgb[(t * 28 * 28 + i) * 3 + 0] = 0.0f;
            rgb[(t * 28 * 28 + i) * 3 + 1] = 0.3f * static_cast<float>(t) / 11.0f;
            rgb[(t * 28 * 28 + i) * 3 + 2] = 0.6f;
        }
    }
    const auto v = evalkit::vectorize(Task::pixels, rgb)[0].values;
    for (int t = 0; t < 12; ++t) EXPECT_NEAR(v(t * 196 + 17), (0.3 * t / 11.0 + 0.6) / 3.0, 1e-6);
}

TEST(Vectorize, CompletenessFollowsFlagsAndLogits) {
    Tensor gt({2, 12, 3}, 1.0f);
    gt[(1 * 12 + 8) * 3 + 2] = 0.0f;  // second track invisible at frame 9
    const auto g = evalkit::vectorize(Task::points, gt);
    EXPECT_TRUE(g[0].complete);
    EXPECT_FALSE(g[1].complete);
    Tensor pred({1, 12, 4}, 1.0f);
    pred[3 * 4 + 2] = -1.0f;
    EXPECT_FALSE(evalkit::vectorize(Task::points, pred)[0].complete);
    Tensor boxes({1, 12, 5}, 1.0f);
    boxes[11 * 5 + 4] = 0.0f;
    EXPECT_FALSE(evalkit::vectorize(Task::boxes, boxes)[0].complete);
    EXPECT_TRUE(evalkit::vectorize(Task::boxes, Tensor({1, 12, 4}))[0].complete);
}

TEST(FilterComplete, KeepsOrderAndMatchesScan) {
    std::vector<TrajectoryVector> all;
    for (int i = 0; i < 5; ++i) all.push_back(trajectory(Task::points, Eigen::VectorXd::Constant(24, i)));
    EXPECT_EQ(evalkit::filter_complete(all).size(), 5u);
    Rng rng(7);
    std::vector<TrajectoryVector> mixed;
    for (int i = 0; i < 50; ++i) mixed.push_back(trajectory(Task::boxes, Eigen::VectorXd::Constant(48, i), rng.uniform() < 0.6));
    std::vector<double> scan;
    for (const auto& t : mixed) {
        if (t.complete) scan.push_back(t.values(0));
    }
    const auto kept = evalkit::filter_complete(mixed);
    ASSERT_EQ(kept.size(), scan.size());
    for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i].values(0), scan[i]);
}

TEST(FitGaussian, DegenerateSetsAndClosedForms) {
    Eigen::MatrixXd same(4, 3);
    same.rowwise() = Eigen::RowVector3d(1, -2, 3);
    const auto g = evalkit::fit_gaussian<double>(same);
    EXPECT_EQ(g.mean, Eigen::Vector3d(1, -2, 3));
    EXPECT_EQ(g.cov, evalkit::kShrinkageFloor * Eigen::Matrix3d::Identity());
    Eigen::MatrixXd pm(2, 1);
    pm << 1.5, -1.5;
    const auto h = evalkit::fit_gaussian<double>(pm);
    EXPECT_EQ(h.mean(0), 0.0);
    EXPECT_NEAR(h.cov(0, 0), 2.25, 2.25 * 2e-6);
    EXPECT_THROW(evalkit::fit_gaussian<double>(Eigen::MatrixXd(1, 3)), std::invalid_argument);
}

TEST(FitGaussian, RecoversMomentsWithinThreeStandardErrors) {
    Rng rng(8);
    const int n = 10000;
    Eigen::Matrix3d chol;
    chol << 1.0, 0, 0, 0.5, 2.0, 0, -0.3, 0.4, 0.7;
    const Eigen::Matrix3d cov = chol * chol.transpose();
    const Eigen::Vector3d mu(1, -2, 0.5);
    Eigen::MatrixXd rows(n, 3);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
        rows.row(i) = (mu + chol * z).transpose();
    }
    const auto g = evalkit::fit_gaussian<double>(rows);
    for (int a = 0; a < 3; ++a) {
        EXPECT_NEAR(g.mean(a), mu(a), 3.0 * std::sqrt(cov(a, a) / n));
        for (int b = 0; b < 3; ++b) {
            const double se = std::sqrt((cov(a, a) * cov(b, b) + cov(a, b) * cov(a, b)) / n);
            EXPECT_NEAR(g.cov(a, b), cov(a, b), 3.0 * se) << a << "," << b;
        }
    }
    EXPECT_LT((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
    EXPECT_GE(es.eigenvalues().minCoeff(), g.shrinkage * (1 - 1e-9));
}

TEST(Frechet, ClosedForms) {
    const auto g = gaussian(Eigen::Vector2d(1, 2), Eigen::Matrix2d{{2, 0.5}, {0.5, 1}});
    EXPECT_EQ(evalkit::frechet_distance(g, g), 0.0);
    const auto a = gaussian(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity());
    const auto b = gaussian(Eigen::Vector2d(3, 4), Eigen::Matrix2d::Identity());
    EXPECT_NEAR(evalkit::frechet_distance(a, b), 5.0, 1e-9);
    const auto c = gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 1.0));
    const auto d = gaussian(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 4.0));
    EXPECT_NEAR(evalkit::frechet_distance(c, d), 1.0, 1e-9);
}

TEST(Frechet, MatchesNewtonSchulzAndIsAMetric) {
    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
        const int dim = 5 + static_cast<int>(rng.below(46));
        Eigen::VectorXd m1(dim), m2(dim);
        for (int k = 0; k < dim; ++k) {
            m1(k) = rng.normal();
            m2(k) = rng.normal();
        }
        const Eigen::MatrixXd s1 = oracle::random_spd(rng, dim), s2 = oracle::random_spd(rng, dim);
        auto g1 = gaussian(m1, s1);
        const auto g2 = gaussian(m2, s2);
        const double fd = evalkit::frechet_distance(g1, g2);
        EXPECT_LT(rel_err(fd, oracle::oracle_frechet(m1, s1, m2, s2)), 1e-6) << dim;
        EXPECT_GE(fd, 0.0);
        EXPECT_NEAR(evalkit::frechet_distance(g2, g1), fd, 1e-9 * fd);
        EXPECT_EQ(evalkit::frechet_distance(g1, g1), 0.0);
        evalkit::prepare_sqrt(g1);
        EXPECT_NEAR(evalkit::frechet_distance(g1, g2), fd, 1e-9 * fd);
    }
}

TEST(Frechet, GrowsWithMeanShift) {
    Rng rng(10);
    const Eigen::MatrixXd s1 = oracle::random_spd(rng, 6), s2 = oracle::random_spd(rng, 6);
    Eigen::VectorXd dir(6);
    for (int k = 0; k < 6; ++k) dir(k) = rng.normal();
    const auto base = gaussian(Eigen::VectorXd::Zero(6), s1);
    double last = -1.0;
    for (double shift : {0.0, 0.1, 0.5, 1.0, 3.0}) {
        const double fd = evalkit::frechet_distance(base, gaussian(shift * dir, s2));
        EXPECT_GT(fd, last);
        last = fd;
    }
}

TEST(Frechet, RejectsMismatchedOrIndefiniteInputs) {
    const auto a = gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    const auto b = gaussian(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
    EXPECT_THROW(evalkit::frechet_distance(a, b), std::invalid_argument);
    const auto bad = gaussian(Eigen::VectorXd::Zero(2), Eigen::Matrix2d{{1, 0}, {0, -0.5}});
    EXPECT_THROW(evalkit::frechet_distance(bad, a), evalkit::NotPsdError);
    EXPECT_THROW(gaussian(Eigen::VectorXd::Zero(2), Eigen::Matrix2d{{1, 0.5}, {0, 1}}), evalkit::NotPsdError);
}

TEST(TemporalVariance, ClosedFormsAndOracle) {
    EXPECT_EQ(evalkit::temporal_variance(std::vector{trajectory(Task::points, Eigen::VectorXd::Constant(24, 3.0))}), 0.0);
    Eigen::VectorXd alt(24);
    for (int t = 0; t < 12; ++t) alt.segment(t * 2, 2).setConstant(t % 2 == 0 ? 1.0 : -1.0);
    EXPECT_DOUBLE_EQ(evalkit::temporal_variance(std::vector{trajectory(Task::points, alt)}), 1.0);
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const Task task = i % 2 == 0 ? Task::boxes : Task::points;
        const int coords = evalkit::coords_per_frame(task);
        std::vector<TrajectoryVector> set;
        std::vector<Eigen::MatrixXd> frames;
        for (int k = 0; k < 7; ++k) {
            Eigen::VectorXd v(coords * 12);
            for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = 30.0 * rng.uniform();
            Eigen::MatrixXd m(12, coords);
            for (int t = 0; t < 12; ++t) m.row(t) = v.segment(t * coords, coords).transpose();
            frames.push_back(m);
            set.push_back(trajectory(task, v));
        }
        EXPECT_NEAR(evalkit::temporal_variance(set), oracle::oracle_temporal_variance(frames), 1e-9);
    }
}

TEST(SampleStats, ClosedFormsAndOracle) {
    const std::vector<double> same(10, 0.7);
    const auto s = evalkit::per_example_stats(same);
    EXPECT_EQ(s.std, 0.0);
    EXPECT_EQ(s.min, s.mean);
    EXPECT_EQ(s.max, s.mean);
    const auto h = evalkit::per_example_stats(std::vector{0.0, 1.0});
    EXPECT_EQ(h.mean, 0.5);
    EXPECT_EQ(h.std, 0.5);
    EXPECT_EQ(h.min, 0.0);
    EXPECT_EQ(h.max, 1.0);
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> v;
        for (int k = 0; k < 10; ++k) v.push_back(rng.uniform(-5, 40));
        const auto got = evalkit::per_example_stats(v);
        const auto want = oracle::oracle_stats(v);
        EXPECT_NEAR(got.mean, want.mean, 1e-12 * std::abs(want.mean));
        EXPECT_NEAR(got.std, want.std, 1e-12 * want.std);
        EXPECT_EQ(got.min, want.min);
        EXPECT_EQ(got.max, want.max);
        EXPECT_LE(got.min, got.mean);
        EXPECT_LE(got.mean, got.max);
    }
    EXPECT_THROW(evalkit::per_example_stats(std::vector<double>{}), std::invalid_argument);
}

TEST(Correlation, ClosedFormsAndOracle) {
    const std::vector<double> x{1, 2, 3, 4}, up{2, 4, 6, 8}, down{8, 6, 4, 2};
    EXPECT_DOUBLE_EQ(evalkit::correlation(x, up).pearson.value(), 1.0);
    EXPECT_DOUBLE_EQ(evalkit::correlation(x, up).spearman.value(), 1.0);
    EXPECT_DOUBLE_EQ(evalkit::correlation(x, down).pearson.value(), -1.0);
    EXPECT_DOUBLE_EQ(evalkit::correlation(x, down).spearman.value(), -1.0);
    EXPECT_FALSE(evalkit::correlation(std::vector{1.0, 2.0}, std::vector{1.0, 3.0}).spearman.has_value());
    EXPECT_FALSE(evalkit::correlation(x, std::vector<double>(4, 1.0)).pearson.has_value());
    EXPECT_EQ(evalkit::average_ranks(std::vector{3.0, 1.0, 3.0, 2.0}), (std::vector{3.5, 1.0, 3.5, 2.0}));
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a, b;
        for (int k = 0; k < 4 + i % 10; ++k) {
            a.push_back(rng.normal());
            b.push_back(a.back() + rng.normal());
        }
        const auto c = evalkit::correlation(a, b);
        EXPECT_NEAR(c.pearson.value(), oracle::oracle_pearson(a, b), 1e-12);
        EXPECT_NEAR(c.spearman.value(), oracle::oracle_spearman(a, b), 1e-12);
    }
}

TEST(Report, ExampleSummariesFollowMetricDirection) {
    using Samples = std::vector<std::optional<double>>;
    const std::vector<Samples> examples{{1.0, 3.0}, {2.0, std::nullopt}, {4.0, 6.0}};
    evalkit::TaskReport iou;
    iou.task = Task::boxes;
    evalkit::summarize_examples(iou, examples);
    ASSERT_EQ(iou.per_example.size(), 2u);
    EXPECT_EQ(iou.mean.value(), 3.5);
    EXPECT_EQ(iou.best.value(), 4.5);
    EXPECT_EQ(iou.worst.value(), 2.5);
    evalkit::TaskReport depth;
    depth.task = Task::depth;
    evalkit::summarize_examples(depth, examples);
    EXPECT_EQ(depth.best.value(), 2.5);
    evalkit::summarize_examples(depth, std::vector<Samples>{{std::nullopt}});
    EXPECT_FALSE(depth.mean.has_value());
}

TEST(Report, SelfDistanceIsBelowShiftedDistance) {
    Rng rng(14);
    std::vector<TrajectoryVector> gt, half, shifted;
    for (int i = 0; i < 400; ++i) {
        Eigen::VectorXd v(24);
        for (Eigen::Index j = 0; j < 24; ++j) v(j) = rng.normal() + 0.1 * static_cast<double>(j);
        gt.push_back(trajectory(Task::points, v, i % 10 != 0));
    }
    for (int i = 0; i < 400; ++i) {
        Eigen::VectorXd v(24);
        for (Eigen::Index j = 0; j < 24; ++j) v(j) = rng.normal() + 0.1 * static_cast<double>(j);
        half.push_back(trajectory(Task::points, v));
        shifted.push_back(trajectory(Task::points, (v.array() + 0.5).matrix()));
    }
    evalkit::TaskReport same, off;
    same.task = off.task = Task::points;
    evalkit::summarize_distribution(same, half, gt);
    evalkit::summarize_distribution(off, shifted, gt);
    EXPECT_EQ(same.trajectories_gt, 360);
    EXPECT_EQ(same.trajectories_pred, 400);
    EXPECT_LT(same.fd.value(), off.fd.value());
    EXPECT_NEAR(off.fd.value(), std::sqrt(24 * 0.25), 1.0);
    EXPECT_NEAR(same.variance_gt.value(), same.variance_pred.value(), 0.15);
    evalkit::TaskReport none;
    none.task = Task::points;
    evalkit::summarize_distribution(none, std::vector<TrajectoryVector>{}, gt);
    EXPECT_FALSE(none.fd.has_value());
    EXPECT_FALSE(none.variance_pred.has_value());
}
