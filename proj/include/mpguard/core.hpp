#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mpguard::core {

// Closed index range [start, end].
struct Interval {
    std::int64_t start = 0;
    std::int64_t end = 0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

// One sensor channel: equidistant samples, all finite, length fixed after
// construction.
class TimeSeries {
public:
    TimeSeries(std::vector<double> values, std::string name = "series",
               double sample_interval = 1.0);

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name() const noexcept { return name_; }
    double sample_interval() const noexcept { return sample_interval_; }

private:
    std::vector<double> values_;
    std::string name_;
    double sample_interval_;
};

// Per-window mean and population standard deviation for all length-m windows.
struct WindowStats {
    std::vector<double> means;
    std::vector<double> stds; // population sigma, >= 0
    std::size_t window_length = 0;
};

// A window counts as constant when sigma < 1e-8 * max(1, |mu|); guards the
// division in the z-normalization of flat (actuator) segments.
inline constexpr double kConstancyTol = 1e-8;

bool is_constant_window(double mean, double stddev) noexcept;

// (x - mu) / sigma with population sigma; constant windows map to all zeros.
// Throws std::invalid_argument for windows shorter than 2.
std::vector<double> znormalize(std::span<const double> window);

// Running-sum sliding statistics, O(n); sums are recomputed from scratch
// every 4096 windows to bound floating-point drift. Exactly flat windows
// (window max == min) report sigma == 0 regardless of the level, since the
// running-sum variance cannot resolve zero at large offsets.
WindowStats sliding_stats(std::span<const double> values, std::size_t m);
WindowStats sliding_stats(const TimeSeries& series, std::size_t m);

// Row-major numeric matrix; the plain data carrier for the classifiers.
struct Matrix {
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : values(r * c, fill), rows(r), cols(c) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * cols, cols};
    }
    std::span<double> row(std::size_t r) {
        return {values.data() + r * cols, cols};
    }
};

} // namespace mpguard::core
