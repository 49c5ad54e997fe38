#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mpguard/core.hpp"

namespace mpguard::preprocess {

enum class ColumnKind { continuous, boolean };

struct ColumnInfo {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    friend bool operator==(const ColumnInfo&, const ColumnInfo&) = default;
};

// Instances x features plus a per-column schema. Boolean columns may only
// hold 0 or 1 (checked on construction).
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(core::Matrix data, std::vector<ColumnInfo> schema);

    const core::Matrix& data() const noexcept { return data_; }
    const std::vector<ColumnInfo>& schema() const noexcept { return schema_; }
    std::size_t rows() const noexcept { return data_.rows; }
    std::size_t cols() const noexcept { return data_.cols; }
    double at(std::size_t r, std::size_t c) const { return data_.at(r, c); }
    std::span<const double> row(std::size_t r) const { return data_.row(r); }

    std::vector<double> column(std::size_t c) const;
    std::optional<std::size_t> column_index(std::string_view name) const;

private:
    core::Matrix data_;
    std::vector<ColumnInfo> schema_;
};

enum class BoolMode { bool_included, non_bool };

enum class Variant { none, zero_mean, linear, pca };

// Orthonormal principal basis of the training covariance.
struct PcaModel {
    std::vector<double> mean_vector;        // per input feature
    core::Matrix components;                // k x features, rows orthonormal
    std::vector<double> explained_variance; // non-increasing, length k
};

// Retention choice for pca_fit: an explicit component count, or the smallest
// k whose cumulative explained-variance ratio reaches the target.
struct PcaChoice {
    static PcaChoice components(std::size_t k) { return {k, {}}; }
    static PcaChoice variance_target(double t) { return {{}, t}; }
    static PcaChoice default_choice() { return variance_target(0.95); }

    std::optional<std::size_t> k;
    std::optional<double> target;
};

// The Table-1-style transforms. zero_mean / linear_scale fit on their input;
// boolean columns pass through untouched.
FeatureMatrix zero_mean(const FeatureMatrix& m);
FeatureMatrix linear_scale(const FeatureMatrix& m);
FeatureMatrix filter_boolean(const FeatureMatrix& m, BoolMode mode);

PcaModel pca_fit(const FeatureMatrix& m, const PcaChoice& choice = PcaChoice::default_choice());
FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& m);

// Symmetric eigendecomposition by cyclic Jacobi sweeps. a is n x n row-major
// and is destroyed. Returns eigenvalues (descending) and matching
// eigenvectors as rows of an n x n matrix.
void jacobi_eigen_symmetric(std::vector<double>& a, std::size_t n,
                            std::vector<double>& eigenvalues, core::Matrix& eigenvectors);

// A fitted preprocessing chain: boolean filter plus one variant, with all
// statistics taken from the training split so they can be replayed on test
// data without leakage. Serializable into model files.
class Pipeline {
public:
    static Pipeline fit(const FeatureMatrix& train, Variant variant, BoolMode mode,
                        const PcaChoice& pca_choice = PcaChoice::default_choice());

    FeatureMatrix apply(const FeatureMatrix& m) const;

    Variant variant() const noexcept { return variant_; }
    BoolMode bool_mode() const noexcept { return mode_; }
    const std::vector<std::size_t>& kept_columns() const noexcept { return kept_; }
    const std::optional<PcaModel>& pca() const noexcept { return pca_; }
    const std::vector<double>& column_means() const noexcept { return means_; }
    std::size_t source_cols() const noexcept { return source_cols_; }

    void save(std::ostream& out) const;
    static Pipeline load(std::istream& in);

private:
    Variant variant_ = Variant::none;
    BoolMode mode_ = BoolMode::bool_included;
    std::size_t source_cols_ = 0;
    std::vector<std::size_t> kept_;        // original column indices kept
    std::vector<ColumnKind> kept_kinds_;   // training-time kinds of the kept columns
    std::vector<double> means_;            // zero_mean (continuous columns)
    std::vector<double> mins_, maxs_;      // linear
    std::optional<PcaModel> pca_;
};

std::string to_string(Variant v);
std::string to_string(BoolMode m);
Variant variant_from_string(std::string_view s);
BoolMode bool_mode_from_string(std::string_view s);

} // namespace mpguard::preprocess
