#include "mpguard/matrix_profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "mpguard/util.hpp"

namespace mpguard::mp {

namespace {

// Precomputed per-window quantities for the diagonal sweep.
//
// cov(i, j) = sum_t (x[i+t] - mu_i)(x[j+t] - mu_j) obeys the diagonal
// recurrence cov(i, j) = cov(i-1, j-1) + df[i] dg[j] + df[j] dg[i] with
//   df[i] = (x[i+m-1] - x[i-1]) / 2
//   dg[i] = (x[i+m-1] - mu_i) + (x[i-1] - mu_{i-1})
// and corr(i, j) = cov(i, j) * inv[i] * inv[j], inv[i] = 1/(sigma_i sqrt(m)).
struct SweepContext {
    const std::vector<double>* x = nullptr;
    std::size_t m = 0;
    std::size_t n_windows = 0;
    std::vector<double> mu;
    std::vector<double> df;
    std::vector<double> dg;
    std::vector<double> inv;    // 0 for constant windows
    std::vector<char> is_const; // sigma below the constancy tolerance
};

SweepContext prepare_sweep(const std::vector<double>& x, std::size_t m) {
    SweepContext ctx;
    ctx.x = &x;
    ctx.m = m;
    ctx.n_windows = x.size() - m + 1;

    core::WindowStats stats = core::sliding_stats(std::span<const double>(x), m);
    ctx.mu = std::move(stats.means);

    const double sqrt_m = std::sqrt(static_cast<double>(m));
    ctx.inv.resize(ctx.n_windows);
    ctx.is_const.resize(ctx.n_windows);
    for (std::size_t i = 0; i < ctx.n_windows; ++i) {
        const bool constant = core::is_constant_window(ctx.mu[i], stats.stds[i]);
        ctx.is_const[i] = constant ? 1 : 0;
        ctx.inv[i] = constant ? 0.0 : 1.0 / (stats.stds[i] * sqrt_m);
    }

    ctx.df.assign(ctx.n_windows, 0.0);
    ctx.dg.assign(ctx.n_windows, 0.0);
    for (std::size_t i = 1; i < ctx.n_windows; ++i) {
        ctx.df[i] = 0.5 * (x[i + m - 1] - x[i - 1]);
        ctx.dg[i] = (x[i + m - 1] - ctx.mu[i]) + (x[i - 1] - ctx.mu[i - 1]);
    }
    return ctx;
}

// Pairwise correlation for (i, j), clamped to [-1, 1]; a lone constant
// window yields 0 (continuous limit), two constant windows yield 1.
inline double pair_corr(const SweepContext& ctx, double cov, std::size_t i, std::size_t j) {
    double c = cov * ctx.inv[i] * ctx.inv[j];
    c = std::clamp(c, -1.0, 1.0);
    if (ctx.is_const[i] & ctx.is_const[j]) c = 1.0;
    return c;
}

struct MinBuffer {
    std::vector<double> best_corr;
    std::vector<std::int64_t> best_idx;

    explicit MinBuffer(std::size_t n)
        : best_corr(n, -2.0), best_idx(n, std::numeric_limits<std::int64_t>::max()) {}

    // lexicographic max over (corr, -index): order-independent, so chunked
    // parallel sweeps merge to the exact serial result
    inline void update(std::size_t at, double corr, std::int64_t other) {
        if (corr > best_corr[at] || (corr == best_corr[at] && other < best_idx[at])) {
            best_corr[at] = corr;
            best_idx[at] = other;
        }
    }

    void merge(const MinBuffer& other) {
        for (std::size_t i = 0; i < best_corr.size(); ++i)
            update(i, other.best_corr[i], other.best_idx[i]);
    }
};

// Walks diagonals [d_begin, d_end); every diagonal is seeded at its head so
// per-pair values do not depend on how diagonals are grouped.
template <bool TrackMin, bool Count>
void sweep_diagonals(const SweepContext& ctx, std::size_t d_begin, std::size_t d_end,
                     double corr_cut, MinBuffer* min_buf, std::int64_t* counts) {
    const std::vector<double>& x = *ctx.x;
    const double* df = ctx.df.data();
    const double* dg = ctx.dg.data();

    for (std::size_t d = d_begin; d < d_end; ++d) {
        double cov = 0.0;
        for (std::size_t t = 0; t < ctx.m; ++t)
            cov += (x[t] - ctx.mu[0]) * (x[d + t] - ctx.mu[d]);

        const std::size_t len = ctx.n_windows - d;
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t j = i + d;
            if (i != 0) cov += df[i] * dg[j] + df[j] * dg[i];
            const double c = pair_corr(ctx, cov, i, j);
            if constexpr (TrackMin) {
                min_buf->update(i, c, static_cast<std::int64_t>(j));
                min_buf->update(j, c, static_cast<std::int64_t>(i));
            }
            if constexpr (Count) {
                if (c >= corr_cut) {
                    ++counts[i];
                    ++counts[j];
                }
            }
        }
    }
}

// Smallest correlation whose distance is strictly below epsilon, so that
// "corr >= cut" counts exactly the pairs with corr_to_distance(corr) < eps
// at floating-point granularity. nullopt when no correlation qualifies.
std::optional<double> corr_cutoff(double epsilon, std::size_t m) {
    if (!(corr_to_distance(1.0, m) < epsilon)) return std::nullopt;
    if (corr_to_distance(-1.0, m) < epsilon) return -1.0;
    double lo = -1.0, hi = 1.0; // R(lo) >= eps, R(hi) < eps
    while (true) {
        const double mid = std::midpoint(lo, hi);
        if (mid == lo || mid == hi) break;
        if (corr_to_distance(mid, m) < epsilon)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

// Contiguous diagonal spans with roughly equal pair counts.
std::vector<std::pair<std::size_t, std::size_t>> partition_diagonals(std::size_t d_begin,
                                                                     std::size_t d_end,
                                                                     std::size_t n_windows,
                                                                     unsigned parts) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    double total = 0.0;
    for (std::size_t d = d_begin; d < d_end; ++d)
        total += static_cast<double>(n_windows - d);
    const double per_part = total / static_cast<double>(parts);

    std::size_t start = d_begin;
    double acc = 0.0;
    for (std::size_t d = d_begin; d < d_end; ++d) {
        acc += static_cast<double>(n_windows - d);
        if (acc >= per_part && spans.size() + 1 < parts) {
            spans.emplace_back(start, d + 1);
            start = d + 1;
            acc = 0.0;
        }
    }
    if (start < d_end) spans.emplace_back(start, d_end);
    return spans;
}

template <bool TrackMin, bool Count>
void run_sweep(const SweepContext& ctx, std::size_t d_begin, std::size_t d_end,
               double corr_cut, unsigned threads, MinBuffer* min_buf,
               std::vector<std::int64_t>* counts) {
    const std::size_t n_diags = d_end - d_begin;
    unsigned t = std::max(1u, threads);
    t = static_cast<unsigned>(std::min<std::size_t>(t, n_diags));

    if (t <= 1) {
        sweep_diagonals<TrackMin, Count>(ctx, d_begin, d_end, corr_cut, min_buf,
                                         Count ? counts->data() : nullptr);
        return;
    }

    const auto spans = partition_diagonals(d_begin, d_end, ctx.n_windows, t);
    std::vector<MinBuffer> local_min;
    std::vector<std::vector<std::int64_t>> local_counts;
    for (std::size_t k = 0; k < spans.size(); ++k) {
        if constexpr (TrackMin) local_min.emplace_back(ctx.n_windows);
        if constexpr (Count) local_counts.emplace_back(ctx.n_windows, 0);
    }

    std::vector<std::thread> workers;
    workers.reserve(spans.size());
    for (std::size_t k = 0; k < spans.size(); ++k) {
        workers.emplace_back([&, k] {
            sweep_diagonals<TrackMin, Count>(ctx, spans[k].first, spans[k].second, corr_cut,
                                             TrackMin ? &local_min[k] : nullptr,
                                             Count ? local_counts[k].data() : nullptr);
        });
    }
    for (auto& w : workers) w.join();

    // fixed merge order; the fold itself is order-independent
    for (std::size_t k = 0; k < spans.size(); ++k) {
        if constexpr (TrackMin) min_buf->merge(local_min[k]);
        if constexpr (Count) {
            for (std::size_t i = 0; i < ctx.n_windows; ++i)
                (*counts)[i] += local_counts[k][i];
        }
    }
}

void validate_profile_inputs(const core::TimeSeries& series, std::size_t m,
                             std::size_t exclusion) {
    const std::size_t n = series.size();
    if (m < 2) throw std::invalid_argument("matrix profile: window length must be >= 2");
    if (n < 2 * m + exclusion)
        throw std::invalid_argument(
            "matrix profile: series shorter than 2*m + exclusion_radius");
    // every query must have at least one admissible neighbor
    if (n < m + 2 * exclusion + 1)
        throw std::invalid_argument(
            "matrix profile: exclusion radius leaves some window with no neighbor");
}

} // namespace

std::size_t default_exclusion_radius(std::size_t m) noexcept { return (m + 1) / 2; }

double corr_to_distance(double corr, std::size_t m) noexcept {
    const double c = std::clamp(corr, -1.0, 1.0);
    return std::sqrt(2.0 * static_cast<double>(m) * (1.0 - c));
}

std::vector<double> distance_profile(const core::TimeSeries& series, std::size_t query_start,
                                     std::size_t m) {
    const std::size_t n = series.size();
    if (m < 2 || m > n)
        throw std::invalid_argument("distance_profile: window length out of range");
    if (query_start > n - m)
        throw std::invalid_argument("distance_profile: query_start out of range");

    const std::vector<double>& x = series.values();
    const std::size_t n_windows = n - m + 1;
    const core::WindowStats stats = core::sliding_stats(std::span<const double>(x), m);

    const double mu_q = stats.means[query_start];
    const double sd_q = stats.stds[query_start];
    const bool const_q = core::is_constant_window(mu_q, sd_q);
    const double dm = static_cast<double>(m);

    std::vector<double> out(n_windows);
    for (std::size_t j = 0; j < n_windows; ++j) {
        const bool const_j = core::is_constant_window(stats.means[j], stats.stds[j]);
        double corr;
        if (const_q || const_j) {
            corr = (const_q && const_j) ? 1.0 : 0.0;
        } else {
            double dot = 0.0;
            for (std::size_t t = 0; t < m; ++t) dot += x[query_start + t] * x[j + t];
            corr = (dot - dm * mu_q * stats.means[j]) / (dm * sd_q * stats.stds[j]);
        }
        out[j] = corr_to_distance(corr, m);
    }
    return out;
}

MatrixProfileResult compute_profile(const core::TimeSeries& series,
                                    const ProfileOptions& options) {
    const std::size_t m = options.window_length;
    const std::size_t exclusion =
        options.exclusion_radius.value_or(default_exclusion_radius(m));
    validate_profile_inputs(series, m, exclusion);
    if (options.epsilon) {
        const double eps = *options.epsilon;
        if (!(eps >= 0.0))
            throw std::invalid_argument("matrix profile: epsilon must be non-negative");
    }
    if (options.threads == 0)
        throw std::invalid_argument("matrix profile: thread count must be >= 1");

    const SweepContext ctx = prepare_sweep(series.values(), m);
    const std::size_t d_begin = exclusion + 1;
    const std::size_t d_end = ctx.n_windows;

    MatrixProfileResult result;
    result.window_length = m;
    result.exclusion_radius = exclusion;
    result.epsilon = options.epsilon;

    MinBuffer min_buf(ctx.n_windows);
    std::vector<std::int64_t> counts;
    if (options.epsilon) {
        counts.assign(ctx.n_windows, 0);
        const auto cut = corr_cutoff(*options.epsilon, m);
        if (cut) {
            run_sweep<true, true>(ctx, d_begin, d_end, *cut, options.threads, &min_buf,
                                  &counts);
        } else {
            // epsilon admits nothing; counts stay zero
            run_sweep<true, false>(ctx, d_begin, d_end, 0.0, options.threads, &min_buf,
                                   nullptr);
        }
    } else {
        run_sweep<true, false>(ctx, d_begin, d_end, 0.0, options.threads, &min_buf, nullptr);
    }

    result.distances.resize(ctx.n_windows);
    result.neighbor_index = std::move(min_buf.best_idx);
    for (std::size_t i = 0; i < ctx.n_windows; ++i)
        result.distances[i] = corr_to_distance(min_buf.best_corr[i], m);
    result.similar_counts = std::move(counts);
    return result;
}

MatrixProfileResult compute_matrix_profile(const core::TimeSeries& series, std::size_t m,
                                           std::size_t exclusion_radius, unsigned threads) {
    ProfileOptions options;
    options.window_length = m;
    options.exclusion_radius = exclusion_radius;
    options.threads = threads;
    return compute_profile(series, options);
}

std::vector<std::int64_t> count_similar(const core::TimeSeries& series, std::size_t m,
                                        double epsilon, std::size_t exclusion_radius,
                                        unsigned threads) {
    validate_profile_inputs(series, m, exclusion_radius);
    if (!(epsilon >= 0.0))
        throw std::invalid_argument("count_similar: epsilon must be non-negative");
    if (threads == 0) throw std::invalid_argument("count_similar: thread count must be >= 1");

    const SweepContext ctx = prepare_sweep(series.values(), m);
    std::vector<std::int64_t> counts(ctx.n_windows, 0);
    const auto cut = corr_cutoff(epsilon, m);
    if (cut) {
        run_sweep<false, true>(ctx, exclusion_radius + 1, ctx.n_windows, *cut, threads,
                               nullptr, &counts);
    }
    return counts;
}

std::vector<core::Interval> detect_anomalies(const MatrixProfileResult& result,
                                             double distance_threshold,
                                             std::int64_t count_threshold,
                                             std::int64_t min_gap) {
    const std::size_t n = result.profile_length();
    const bool use_counts = result.has_counts();

    std::vector<core::Interval> intervals;
    bool in_run = false;
    std::int64_t run_start = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool flagged = result.distances[i] > distance_threshold;
        if (!flagged && use_counts)
            flagged = result.similar_counts[i] < count_threshold;
        if (flagged && !in_run) {
            in_run = true;
            run_start = static_cast<std::int64_t>(i);
        } else if (!flagged && in_run) {
            intervals.push_back({run_start, static_cast<std::int64_t>(i) - 1});
            in_run = false;
        }
    }
    if (in_run) intervals.push_back({run_start, static_cast<std::int64_t>(n) - 1});

    if (intervals.empty()) return intervals;

    std::vector<core::Interval> merged;
    merged.push_back(intervals.front());
    for (std::size_t k = 1; k < intervals.size(); ++k) {
        const std::int64_t gap = intervals[k].start - merged.back().end - 1;
        if (gap <= min_gap)
            merged.back().end = intervals[k].end;
        else
            merged.push_back(intervals[k]);
    }
    return merged;
}

double quantile(std::span<const double> values, double q) {
    return util::nearest_rank_quantile(std::vector<double>(values.begin(), values.end()), q);
}

double auto_epsilon(const MatrixProfileResult& result) {
    return quantile(std::span<const double>(result.distances), 0.05);
}

} // namespace mpguard::mp
