#include "latentcast/evalkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace latentcast::evalkit {

SampleStats per_example_stats(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("per_example_stats: no samples");
    const auto n = static_cast<double>(values.size());
    SampleStats s;
    s.count = static_cast<int>(values.size());
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    s.min = *lo;
    s.max = *hi;
    // Equal samples: the rounded running sum would leave an ulp of spread.
    if (s.min == s.max) {
        s.mean = s.min;
        return s;
    }
    s.mean = std::clamp(std::accumulate(values.begin(), values.end(), 0.0) / n, s.min, s.max);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / n);
    return s;
}

double temporal_variance(std::span<const TrajectoryVector> trajectories) {
    if (trajectories.empty()) return 0.0;
    double total = 0.0;
    std::int64_t terms = 0;
    for (const auto& tv : trajectories) {
        const int coords = coords_per_frame(tv.task);
        if (tv.values.size() != coords * kTrajectoryFrames) {
            throw std::invalid_argument("temporal_variance: trajectory has " + std::to_string(tv.values.size()) +
                                        " values, expected " + std::to_string(coords * kTrajectoryFrames));
        }
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
            tv.values.data(), kTrajectoryFrames, coords);
        const Eigen::RowVectorXd mean = m.colwise().mean();
        total += (m.rowwise() - mean).array().square().colwise().mean().sum();
        terms += coords;
    }
    return total / static_cast<double>(terms);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

Correlation correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("correlation: length mismatch");
    if (x.size() < 3) return {};
    const auto rx = average_ranks(x), ry = average_ranks(y);
    return {pearson(x, y), pearson(rx, ry)};
}

}  // namespace latentcast::evalkit
