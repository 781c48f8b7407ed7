#pragma once

#include "latentcast/evalkit/vectorize.hpp"

#include <optional>
#include <span>

namespace latentcast::evalkit {

/// Statistics of one example's metric over its N samples; std uses the
/// population denominator.
struct SampleStats {
    double mean = 0, std = 0, min = 0, max = 0;
    int count = 0;
};

/// Throws std::invalid_argument when values is empty.
SampleStats per_example_stats(std::span<const double> values);

/// Per trajectory and per coordinate, the population variance over the 12
/// frames, averaged over coordinates and trajectories. Zero for an empty set.
double temporal_variance(std::span<const TrajectoryVector> trajectories);

struct Correlation {
    std::optional<double> pearson;
    std::optional<double> spearman;
};

/// Pearson r and Spearman rho (average ranks for ties). Both are nullopt for
/// fewer than 3 pairs or a constant input. Throws on a length mismatch.
Correlation correlation(std::span<const double> x, std::span<const double> y);

/// 1-based ranks, ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace latentcast::evalkit
