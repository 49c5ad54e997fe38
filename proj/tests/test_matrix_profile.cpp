#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpguard/matrix_profile.hpp"
#include "mpguard/util.hpp"
#include "oracles.hpp"

using namespace mpguard;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> random_series(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    util::Rng64 rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = scale * (rng.next_double() * 2.0 - 1.0);
    return out;
}

core::TimeSeries sine_series(std::size_t n, std::size_t period) {
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t)
        x[t] = std::sin(2.0 * kPi * static_cast<double>(t) / static_cast<double>(period));
    return core::TimeSeries(std::move(x), "sine");
}

} // namespace

TEST_CASE("corr_to_distance endpoints") {
    CHECK(mp::corr_to_distance(1.0, 100) == 0.0);
    CHECK(mp::corr_to_distance(-1.0, 100) == doctest::Approx(20.0).epsilon(1e-12));
    // clamps floating-point overshoot
    CHECK(mp::corr_to_distance(1.0 + 1e-9, 100) == 0.0);
    CHECK(mp::corr_to_distance(-1.5, 100) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("corr_to_distance agrees with the direct z-normalized distance") {
    const std::size_t m = 50;
    for (std::uint64_t trial = 0; trial < 500; ++trial) {
        const auto x = random_series(2 * m, 500 + trial, 5.0);
        // Pearson correlation of the two halves, computed directly
        double mu_a = 0.0, mu_b = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            mu_a += x[t];
            mu_b += x[m + t];
        }
        mu_a /= m;
        mu_b /= m;
        double dot = 0.0, ss_a = 0.0, ss_b = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            dot += x[t] * x[m + t];
            ss_a += (x[t] - mu_a) * (x[t] - mu_a);
            ss_b += (x[m + t] - mu_b) * (x[m + t] - mu_b);
        }
        const double sd_a = std::sqrt(ss_a / m), sd_b = std::sqrt(ss_b / m);
        const double corr = (dot - m * mu_a * mu_b) / (m * sd_a * sd_b);

        const double via_corr = mp::corr_to_distance(corr, m);
        const double direct = oracles::naive_pair_distance(x, 0, m, m);
        CHECK(std::fabs(via_corr - direct) < 1e-6);
    }
}

TEST_CASE("distance_profile basics") {
    const auto series = sine_series(640, 64);

    SUBCASE("self distance is zero") {
        const auto profile = mp::distance_profile(series, 100, 32);
        CHECK(profile[100] == 0.0);
    }
    SUBCASE("an exact periodic repeat is a zero") {
        const auto profile = mp::distance_profile(series, 0, 64);
        CHECK(profile[64] < 1e-6);
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(mp::distance_profile(series, 640, 32), std::invalid_argument);
        CHECK_THROWS_AS(mp::distance_profile(series, 0, 1), std::invalid_argument);
        CHECK_THROWS_AS(mp::distance_profile(series, 0, 641), std::invalid_argument);
    }
}

TEST_CASE("distance_profile matches the naive computation") {
    const auto x = random_series(256, 31, 2.0);
    const core::TimeSeries series(x, "rand");
    const std::size_t m = 16;
    for (std::size_t q : {std::size_t{0}, std::size_t{59}, std::size_t{240}}) {
        const auto profile = mp::distance_profile(series, q, m);
        for (std::size_t j = 0; j + m <= x.size(); ++j) {
            const double expected = oracles::naive_pair_distance(x, q, j, m);
            CHECK(std::fabs(profile[j] - expected) < 1e-6);
        }
    }
}

TEST_CASE("matrix profile of a pure sine is tiny everywhere") {
    const std::size_t p = 50;
    const auto series = sine_series(10 * p, p);
    const auto result = mp::compute_matrix_profile(series, p, mp::default_exclusion_radius(p));
    double max_d = 0.0;
    for (double d : result.distances) max_d = std::max(max_d, d);
    CHECK(max_d < 0.01 * std::sqrt(2.0 * static_cast<double>(p)));
}

TEST_CASE("matrix profile equals brute force on random series") {
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
        util::Rng64 rng(4000 + trial);
        const std::size_t n = 192 + rng.next_below(320);
        const std::size_t m = 8 + rng.next_below(25);
        const std::size_t exclusion = m / 2;
        const auto x = random_series(n, 8800 + trial, 4.0);
        const core::TimeSeries series(x, "rand");

        const auto result = mp::compute_matrix_profile(series, m, exclusion);
        const auto brute = oracles::brute_force_profile(x, m, exclusion);
        REQUIRE(result.profile_length() == brute.distances.size());
        for (std::size_t i = 0; i < brute.distances.size(); ++i) {
            CHECK(std::fabs(result.distances[i] - brute.distances[i]) < 1e-6);
            if (result.neighbor_index[i] != brute.neighbors[i]) {
                // only exact distance ties may disagree on the index
                const double via_result = oracles::naive_pair_distance(
                    x, i, static_cast<std::size_t>(result.neighbor_index[i]), m);
                const double via_brute = oracles::naive_pair_distance(
                    x, i, static_cast<std::size_t>(brute.neighbors[i]), m);
                CHECK(std::fabs(via_result - via_brute) <= 1e-12);
            }
        }
    }
}

TEST_CASE("exclusion zone is honored") {
    for (std::size_t exclusion : {std::size_t{0}, std::size_t{5}, std::size_t{20}}) {
        const auto x = random_series(300, 17 + exclusion, 1.0);
        const auto result =
            mp::compute_matrix_profile(core::TimeSeries(x, "r"), 12, exclusion);
        for (std::size_t i = 0; i < result.profile_length(); ++i) {
            const auto gap = std::llabs(result.neighbor_index[i] - static_cast<std::int64_t>(i));
            CHECK(gap > static_cast<std::int64_t>(exclusion));
        }
    }
}

TEST_CASE("count_similar with an unbounded epsilon counts everything") {
    const std::size_t n = 200, m = 10, exclusion = 5;
    const auto x = random_series(n, 123, 1.0);
    const core::TimeSeries series(x, "r");
    const double eps = std::sqrt(4.0 * m) + 1.0;
    const auto counts = mp::count_similar(series, m, eps, exclusion);
    const std::int64_t n_windows = static_cast<std::int64_t>(n - m + 1);
    for (std::int64_t i = 0; i < n_windows; ++i) {
        const std::int64_t excluded = std::min<std::int64_t>(i, exclusion) +
                                      std::min<std::int64_t>(n_windows - 1 - i, exclusion) + 1;
        CHECK(counts[static_cast<std::size_t>(i)] == n_windows - excluded);
    }
}

TEST_CASE("count_similar finds the planted motif copies") {
    // steep ramp base; an identical burst pasted at three separated spots
    const std::size_t n = 800, m = 32;
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t) x[t] = static_cast<double>(t);
    const std::size_t spots[3] = {100, 300, 600};
    for (std::size_t s : spots)
        for (std::size_t t = 0; t < m; ++t)
            x[s + t] = 10.0 * std::sin(2.0 * kPi * static_cast<double>(t) / 8.0);

    const auto counts = mp::count_similar(core::TimeSeries(x, "motif"), m, 0.01, 16);
    for (std::size_t s : spots) CHECK(counts[s] == 2); // the other two copies
}

TEST_CASE("count_similar is monotone in epsilon") {
    const auto x = random_series(240, 5150, 2.0);
    const core::TimeSeries series(x, "r");
    const std::size_t m = 12, exclusion = 6;
    const auto small = mp::count_similar(series, m, 1.0, exclusion);
    const auto medium = mp::count_similar(series, m, 3.0, exclusion);
    const auto large = mp::count_similar(series, m, 6.0, exclusion);
    for (std::size_t i = 0; i < small.size(); ++i) {
        CHECK(small[i] <= medium[i]);
        CHECK(medium[i] <= large[i]);
    }
}

TEST_CASE("count_similar matches brute force") {
    const auto x = random_series(220, 606, 3.0);
    const std::size_t m = 14, exclusion = 7;
    for (double eps : {1.5, 3.0, 4.5}) {
        const auto counts = mp::count_similar(core::TimeSeries(x, "r"), m, eps, exclusion);
        const auto brute = oracles::brute_force_counts(x, m, eps, exclusion);
        CHECK(counts == brute);
    }
}

TEST_CASE("counts >= 1 exactly when the profile distance is below epsilon") {
    const auto x = random_series(300, 2024, 2.0);
    const core::TimeSeries series(x, "r");
    const std::size_t m = 16, exclusion = 8;

    const auto base = mp::compute_matrix_profile(series, m, exclusion);
    // epsilons chosen on exact stored distances to stress the boundary
    const double boundary = base.distances[base.profile_length() / 3];
    for (const double eps : {boundary, 0.5, 2.0, 4.0}) {
        mp::ProfileOptions options;
        options.window_length = m;
        options.exclusion_radius = exclusion;
        options.epsilon = eps;
        const auto fused = mp::compute_profile(series, options);
        REQUIRE(fused.has_counts());
        for (std::size_t i = 0; i < fused.profile_length(); ++i) {
            CHECK(fused.distances[i] == base.distances[i]);
            CHECK((fused.similar_counts[i] >= 1) == (fused.distances[i] < eps));
        }
    }
}

TEST_CASE("results are identical for any worker count") {
    const auto x = random_series(1500, 90210, 2.0);
    const core::TimeSeries series(x, "r");
    mp::ProfileOptions options;
    options.window_length = 40;
    options.epsilon = 3.0;

    options.threads = 1;
    const auto one = mp::compute_profile(series, options);
    for (unsigned threads : {2u, 4u, 8u}) {
        options.threads = threads;
        const auto many = mp::compute_profile(series, options);
        CHECK(one.distances == many.distances);
        CHECK(one.neighbor_index == many.neighbor_index);
        CHECK(one.similar_counts == many.similar_counts);
    }
}

TEST_CASE("flat channels produce the documented constant-window distances") {
    // flat head, noisy tail: flat windows match each other at distance 0 and
    // mixed flat/non-flat pairs sit at sqrt(2m)
    const std::size_t m = 8;
    std::vector<double> x(160, 3.0);
    util::Rng64 rng(5);
    for (std::size_t t = 80; t < x.size(); ++t) x[t] = rng.next_double() * 4.0;

    const auto result = mp::compute_matrix_profile(core::TimeSeries(x, "flat"), m, 4);
    CHECK(result.distances[0] == 0.0); // another all-flat window exists
    const auto brute = oracles::brute_force_profile(x, m, 4);
    for (std::size_t i = 0; i < brute.distances.size(); ++i)
        CHECK(std::fabs(result.distances[i] - brute.distances[i]) < 1e-6);
}

TEST_CASE("detect_anomalies merges runs and respects thresholds") {
    mp::MatrixProfileResult result;
    result.window_length = 4;
    result.distances.assign(300, 1.0);
    result.neighbor_index.assign(300, 0);

    SUBCASE("clean data flags nothing") {
        CHECK(mp::detect_anomalies(result, 2.0, 0, 10).empty());
    }
    SUBCASE("one flagged run becomes one interval") {
        for (std::size_t i = 100; i <= 150; ++i) result.distances[i] = 5.0;
        const auto intervals = mp::detect_anomalies(result, 2.0, 0, 0);
        REQUIRE(intervals.size() == 1);
        CHECK(intervals[0] == core::Interval{100, 150});
    }
    SUBCASE("runs 40 apart merge under min_gap 50") {
        for (std::size_t i = 100; i <= 110; ++i) result.distances[i] = 5.0;
        for (std::size_t i = 151; i <= 160; ++i) result.distances[i] = 5.0;
        const auto merged = mp::detect_anomalies(result, 2.0, 0, 50);
        REQUIRE(merged.size() == 1);
        CHECK(merged[0] == core::Interval{100, 160});
        const auto split = mp::detect_anomalies(result, 2.0, 0, 10);
        CHECK(split.size() == 2);
    }
    SUBCASE("low similar counts flag independently of distance") {
        result.similar_counts.assign(300, 100);
        for (std::size_t i = 200; i <= 220; ++i) result.similar_counts[i] = 3;
        const auto intervals = mp::detect_anomalies(result, 2.0, 20, 0);
        REQUIRE(intervals.size() == 1);
        CHECK(intervals[0] == core::Interval{200, 220});
    }
}

TEST_CASE("auto epsilon is the 5th percentile of the distances") {
    mp::MatrixProfileResult result;
    result.distances.resize(100);
    for (std::size_t i = 0; i < 100; ++i) result.distances[i] = static_cast<double>(i + 1);
    CHECK(mp::auto_epsilon(result) == 5.0);
}

TEST_CASE("matrix profile input validation") {
    const auto x = random_series(100, 1, 1.0);
    const core::TimeSeries series(x, "r");
    CHECK_THROWS_AS(mp::compute_matrix_profile(series, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(mp::compute_matrix_profile(series, 49, 10), std::invalid_argument);
    CHECK_THROWS_AS(mp::compute_matrix_profile(series, 10, 60), std::invalid_argument);
    CHECK_THROWS_AS(mp::count_similar(series, 10, -1.0, 5), std::invalid_argument);
    mp::ProfileOptions options;
    options.window_length = 10;
    options.threads = 0;
    CHECK_THROWS_AS(mp::compute_profile(series, options), std::invalid_argument);
}
