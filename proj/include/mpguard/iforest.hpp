#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mpguard/core.hpp"

namespace mpguard::iforest {

// Flat tree node. Internal nodes carry a feature index and split value plus
// child slots; external nodes carry the count of training points that
// reached them (feature == -1).
struct TreeNode {
    std::int32_t feature = -1;
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int64_t size = 0;

    bool is_external() const noexcept { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
};

struct ForestModel {
    std::vector<Tree> trees;
    std::size_t n_trees = 0;
    std::size_t subsample_size = 0;
    std::size_t height_limit = 0;
    std::size_t dimension = 0;
    std::uint64_t seed = 0;
    double contamination = 0.05;
    // score > score_threshold predicts anomaly; the empirical
    // (1 - contamination) quantile of the training scores
    double score_threshold = 0.5;
};

struct ForestOptions {
    std::size_t n_trees = 100;
    std::size_t subsample = 256;
    std::optional<std::size_t> height_limit; // default ceil(log2(subsample))
    std::uint64_t seed = 0;
    double contamination = 0.05;
    unsigned threads = 1;
};

// c(n): expected unsuccessful-search path length of a binary search tree on
// n points; c(1) = 0 and c(2) = 1 exactly, the harmonic-number asymptotic
// 2(ln(n-1) + 0.5772156649) - 2(n-1)/n beyond that.
double average_path_length(std::int64_t n) noexcept;

// Each tree grows on an independent random subsample (without replacement)
// until the height limit, a single point, or an all-identical subset stops
// it. Deterministic for a fixed seed, regardless of thread count.
ForestModel fit_forest(const core::Matrix& data, const ForestOptions& options);
ForestModel fit_forest(const core::Matrix& data, std::size_t n_trees,
                       std::size_t subsample, std::uint64_t seed);

// Mean over trees of (edges traversed + c(external node size)).
double path_length(const ForestModel& model, std::span<const double> x);

// 2^(-path / c(subsample)), in (0, 1]; higher is more anomalous.
double anomaly_score(const ForestModel& model, std::span<const double> x);

bool predict_anomaly(const ForestModel& model, std::span<const double> x);

// All rows sorted by ascending path length (anomalies first), ties broken by
// row index.
std::vector<std::pair<std::int64_t, double>> rank_anomalies(const ForestModel& model,
                                                            const core::Matrix& data);

// Text serialization: header lines, then each tree's nodes in preorder as
// "I <feature> <split>" / "E <size>" records.
void save_forest(const ForestModel& model, std::ostream& out);
ForestModel load_forest(std::istream& in);

} // namespace mpguard::iforest
