#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpguard/core.hpp"
#include "mpguard/preprocess.hpp"

namespace mpguard::ingest {

// Ground-truth attack labels, both as a per-step 0/1 sequence and as the
// equivalent sorted, disjoint closed intervals of 1-runs.
struct LabelIntervals {
    std::vector<std::uint8_t> per_step;
    std::vector<core::Interval> intervals;

    static LabelIntervals from_per_step(std::vector<std::uint8_t> steps);
    static LabelIntervals from_intervals(const std::vector<core::Interval>& intervals,
                                         std::size_t length);

    std::size_t size() const noexcept { return per_step.size(); }
};

// Column-name conventions of the input CSV, loadable from a key=value file.
// Recognized keys: timestamp_column, label_column, label_attack_token,
// label_normal_token, and kind.<column>=boolean|continuous overrides.
struct SchemaConfig {
    std::optional<std::string> timestamp_column; // default: a column named "timestamp"
    std::optional<std::string> label_column;     // default: "label" or "Normal/Attack"
    std::optional<std::string> label_attack_token; // accepted besides "attack"/"1"
    std::optional<std::string> label_normal_token; // accepted besides "normal"/"0"
    std::map<std::string, preprocess::ColumnKind> column_kinds;

    static SchemaConfig from_file(const std::filesystem::path& path);
    static SchemaConfig from_text(std::string_view text);
};

struct Dataset {
    preprocess::FeatureMatrix features;
    LabelIntervals labels;
    std::vector<std::string> timestamps; // empty when the file has none
    std::string source;

    std::size_t rows() const noexcept { return features.rows(); }

    // Extract one feature column as a TimeSeries; throws if the name is unknown.
    core::TimeSeries channel(std::string_view name) const;
};

// Header row required; feature columns are everything that is neither the
// timestamp nor the label column. Column kinds are inferred (boolean iff all
// observed values are 0/1) unless overridden by the schema. Parse problems
// raise errors that name the offending line.
Dataset load_csv(const std::filesystem::path& path, const SchemaConfig& schema = {});

void write_csv(const Dataset& ds, const std::filesystem::path& path);

// Order-preserving split at a row boundary: [0, boundary) and [boundary, n).
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, std::size_t boundary);

// Keep only label-0 rows (one-class training data).
Dataset filter_normal_rows(const Dataset& ds);

} // namespace mpguard::ingest
