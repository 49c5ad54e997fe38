#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mpguard/core.hpp"

namespace mpguard::mp {

// Self-join profile: per window start, the minimal z-normalized Euclidean
// distance to any window outside the exclusion zone, the index achieving it,
// and (when epsilon was set) how many windows lie strictly within epsilon.
struct MatrixProfileResult {
    std::vector<double> distances;
    std::vector<std::int64_t> neighbor_index;
    std::vector<std::int64_t> similar_counts; // empty unless epsilon was given
    std::size_t window_length = 0;
    std::size_t exclusion_radius = 0;
    std::optional<double> epsilon;

    std::size_t profile_length() const noexcept { return distances.size(); }
    bool has_counts() const noexcept { return !similar_counts.empty(); }
};

// ceil(m / 2): wide enough that a window cannot match its own shifted copy
std::size_t default_exclusion_radius(std::size_t m) noexcept;

// sqrt(2m(1 - corr)); corr is clamped to [-1, 1] first. Monotone in corr.
double corr_to_distance(double corr, std::size_t m) noexcept;

// Distances from the window at query_start to every window of the series.
std::vector<double> distance_profile(const core::TimeSeries& series,
                                     std::size_t query_start, std::size_t m);

struct ProfileOptions {
    std::size_t window_length = 0;
    // defaults to default_exclusion_radius(window_length)
    std::optional<std::size_t> exclusion_radius;
    // enables similar-instance counting (strictly-less-than comparison)
    std::optional<double> epsilon;
    unsigned threads = 1;
};

MatrixProfileResult compute_profile(const core::TimeSeries& series,
                                    const ProfileOptions& options);

MatrixProfileResult compute_matrix_profile(const core::TimeSeries& series, std::size_t m,
                                           std::size_t exclusion_radius,
                                           unsigned threads = 1);

std::vector<std::int64_t> count_similar(const core::TimeSeries& series, std::size_t m,
                                        double epsilon, std::size_t exclusion_radius,
                                        unsigned threads = 1);

// Flags index i when distances[i] > distance_threshold or, if counts are
// present, similar_counts[i] < count_threshold; flagged runs separated by
// <= min_gap unflagged indices are merged. Intervals are window-start indices.
std::vector<core::Interval> detect_anomalies(const MatrixProfileResult& result,
                                             double distance_threshold,
                                             std::int64_t count_threshold,
                                             std::int64_t min_gap);

// Nearest-rank quantile of a sample, q in [0, 1].
double quantile(std::span<const double> values, double q);

// The epsilon default: 5th percentile of the profile distances.
double auto_epsilon(const MatrixProfileResult& result);

} // namespace mpguard::mp
