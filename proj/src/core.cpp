#include "mpguard/core.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace mpguard::core {

namespace {

// Recompute the running sums from scratch this often; bounds accumulation
// error without changing the O(n) cost.
constexpr std::size_t kResyncPeriod = 4096;

// Sliding-window extrema via monotonic index deques, O(n) total. Exactly
// flat windows (max == min) must report sigma == 0: the running-sum variance
// cancels catastrophically there (flatlined sensors sit at arbitrary levels),
// and every constant-window rule downstream keys off that zero.
class WindowExtrema {
public:
    WindowExtrema(std::span<const double> values, std::size_t m) : values_(values), m_(m) {}

    // advance to window [i, i+m); must be called with i = 0, 1, 2, ...
    void advance(std::size_t i) {
        const std::size_t last = i + m_ - 1;
        for (std::size_t t = (i == 0 ? 0 : last); t <= last; ++t) {
            while (!min_.empty() && values_[min_.back()] >= values_[t]) min_.pop_back();
            min_.push_back(t);
            while (!max_.empty() && values_[max_.back()] <= values_[t]) max_.pop_back();
            max_.push_back(t);
        }
        while (min_.front() < i) min_.pop_front();
        while (max_.front() < i) max_.pop_front();
    }

    bool flat() const { return values_[min_.front()] == values_[max_.front()]; }
    double level() const { return values_[min_.front()]; }

private:
    std::span<const double> values_;
    std::size_t m_;
    std::deque<std::size_t> min_, max_;
};

} // namespace

TimeSeries::TimeSeries(std::vector<double> values, std::string name, double sample_interval)
    : values_(std::move(values)), name_(std::move(name)), sample_interval_(sample_interval) {
    if (values_.empty()) throw std::invalid_argument("TimeSeries: values must be non-empty");
    if (!(sample_interval_ > 0.0))
        throw std::invalid_argument("TimeSeries: sample_interval must be positive");
    for (double v : values_) {
        if (!std::isfinite(v))
            throw std::invalid_argument("TimeSeries: non-finite sample in '" + name_ + "'");
    }
}

bool is_constant_window(double mean, double stddev) noexcept {
    return stddev < kConstancyTol * std::max(1.0, std::fabs(mean));
}

std::vector<double> znormalize(std::span<const double> window) {
    if (window.size() < 2)
        throw std::invalid_argument("znormalize: window length must be >= 2");
    const double m = static_cast<double>(window.size());
    double sum = 0.0, sum_sq = 0.0;
    bool flat = true;
    for (double v : window) {
        sum += v;
        sum_sq += v * v;
        flat = flat && v == window[0];
    }
    const double mu = sum / m;
    const double var = std::max(0.0, sum_sq / m - mu * mu);
    const double sigma = std::sqrt(var);

    std::vector<double> out(window.size());
    if (flat || is_constant_window(mu, sigma)) {
        return out; // all zeros
    }
    for (std::size_t i = 0; i < window.size(); ++i) out[i] = (window[i] - mu) / sigma;
    return out;
}

WindowStats sliding_stats(std::span<const double> values, std::size_t m) {
    const std::size_t n = values.size();
    if (m < 2 || m > n)
        throw std::invalid_argument("sliding_stats: window length out of range");

    const std::size_t n_windows = n - m + 1;
    WindowStats stats;
    stats.window_length = m;
    stats.means.resize(n_windows);
    stats.stds.resize(n_windows);

    const double inv_m = 1.0 / static_cast<double>(m);
    WindowExtrema extrema(values, m);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n_windows; ++i) {
        if (i % kResyncPeriod == 0) {
            sum = 0.0;
            sum_sq = 0.0;
            for (std::size_t t = i; t < i + m; ++t) {
                sum += values[t];
                sum_sq += values[t] * values[t];
            }
        } else {
            const double drop = values[i - 1];
            const double add = values[i + m - 1];
            sum += add - drop;
            sum_sq += add * add - drop * drop;
        }
        extrema.advance(i);
        if (extrema.flat()) {
            stats.means[i] = extrema.level();
            stats.stds[i] = 0.0;
            continue;
        }
        const double mu = sum * inv_m;
        const double var = std::max(0.0, sum_sq * inv_m - mu * mu);
        stats.means[i] = mu;
        stats.stds[i] = std::sqrt(var);
    }
    return stats;
}

WindowStats sliding_stats(const TimeSeries& series, std::size_t m) {
    return sliding_stats(std::span<const double>(series.values()), m);
}

} // namespace mpguard::core
