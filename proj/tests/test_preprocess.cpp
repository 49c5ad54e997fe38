#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mpguard/preprocess.hpp"
#include "mpguard/util.hpp"
#include "oracles.hpp"

using namespace mpguard;
using preprocess::BoolMode;
using preprocess::ColumnInfo;
using preprocess::ColumnKind;
using preprocess::FeatureMatrix;
using preprocess::Variant;

namespace {

FeatureMatrix single_column(const std::vector<double>& values, ColumnKind kind) {
    core::Matrix m(values.size(), 1);
    for (std::size_t r = 0; r < values.size(); ++r) m.at(r, 0) = values[r];
    return FeatureMatrix(std::move(m), {{"c0", kind}});
}

FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    util::Rng64 rng(seed);
    core::Matrix m(rows, cols);
    std::vector<ColumnInfo> schema(cols);
    for (std::size_t c = 0; c < cols; ++c)
        schema[c] = {"c" + std::to_string(c), ColumnKind::continuous};
    for (auto& v : m.values) v = rng.next_double() * 10.0 - 5.0;
    return FeatureMatrix(std::move(m), std::move(schema));
}

} // namespace

TEST_CASE("zero_mean centers continuous columns") {
    const auto out = preprocess::zero_mean(single_column({1.0, 2.0, 3.0}, ColumnKind::continuous));
    CHECK(out.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(out.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.at(2, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero_mean is idempotent and skips boolean columns") {
    const auto m = random_matrix(64, 4, 11);
    const auto once = preprocess::zero_mean(m);
    const auto twice = preprocess::zero_mean(once);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            CHECK(std::fabs(twice.at(r, c) - once.at(r, c)) <= 1e-12);

    const auto boolean = preprocess::zero_mean(single_column({0, 1, 1}, ColumnKind::boolean));
    CHECK(boolean.at(0, 0) == 0.0);
    CHECK(boolean.at(1, 0) == 1.0);
    CHECK(boolean.at(2, 0) == 1.0);
}

TEST_CASE("linear_scale maps onto [0, 1]") {
    const auto out = preprocess::linear_scale(single_column({2.0, 4.0, 6.0}, ColumnKind::continuous));
    CHECK(out.at(0, 0) == 0.0);
    CHECK(out.at(1, 0) == 0.5);
    CHECK(out.at(2, 0) == 1.0);

    const auto flat = preprocess::linear_scale(single_column({7.0, 7.0}, ColumnKind::continuous));
    CHECK(flat.at(0, 0) == 0.5);
    CHECK(flat.at(1, 0) == 0.5);

    const auto m = preprocess::linear_scale(random_matrix(100, 3, 77));
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double lo = 1e300, hi = -1e300;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            lo = std::min(lo, m.at(r, c));
            hi = std::max(hi, m.at(r, c));
        }
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
    }
}

TEST_CASE("filter_boolean drops exactly the boolean columns") {
    // 51 columns, 25 of them boolean, like the real sensor array
    const std::size_t cols = 51;
    core::Matrix m(8, cols);
    std::vector<ColumnInfo> schema(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        const bool boolean = c % 2 == 1; // 25 odd indices
        schema[c] = {"c" + std::to_string(c),
                     boolean ? ColumnKind::boolean : ColumnKind::continuous};
        for (std::size_t r = 0; r < 8; ++r)
            m.at(r, c) = boolean ? static_cast<double>((r + c) % 2) : 0.1 * static_cast<double>(r + c);
    }
    const FeatureMatrix fm(std::move(m), std::move(schema));

    const auto non_bool = preprocess::filter_boolean(fm, BoolMode::non_bool);
    CHECK(non_bool.cols() == 26);
    const auto all = preprocess::filter_boolean(fm, BoolMode::bool_included);
    CHECK(all.cols() == 51);
    const auto again = preprocess::filter_boolean(non_bool, BoolMode::non_bool);
    CHECK(again.cols() == 26);
}

TEST_CASE("pca finds the axis carrying all the variance") {
    core::Matrix m(50, 2);
    util::Rng64 rng(3);
    for (std::size_t r = 0; r < 50; ++r) {
        m.at(r, 0) = rng.next_double() * 8.0 - 4.0;
        m.at(r, 1) = 2.5; // constant
    }
    const FeatureMatrix fm(std::move(m),
                           {{"a", ColumnKind::continuous}, {"b", ColumnKind::continuous}});
    const auto model = preprocess::pca_fit(fm, preprocess::PcaChoice::components(1));
    CHECK(std::fabs(std::fabs(model.components.at(0, 0)) - 1.0) <= 1e-10);
    CHECK(std::fabs(model.components.at(0, 1)) <= 1e-10);
}

TEST_CASE("pca eigenpairs match an independent Jacobi oracle at 3x3") {
    // build data whose covariance is a known 3x3 fixture by construction:
    // just compare the library's decomposition of C with the oracle's
    const std::vector<double> fixture{4.0, 1.2, -0.6, 1.2, 3.0, 0.4, -0.6, 0.4, 2.0};

    std::vector<double> a = fixture;
    std::vector<double> eigenvalues;
    core::Matrix vectors;
    preprocess::jacobi_eigen_symmetric(a, 3, eigenvalues, vectors);

    const auto oracle = oracles::classical_jacobi(fixture, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::fabs(eigenvalues[i] - oracle.values[i]) <= 1e-8);
        // vectors match up to sign
        double dot = 0.0;
        for (std::size_t k = 0; k < 3; ++k) dot += vectors.at(i, k) * oracle.vectors[i][k];
        CHECK(std::fabs(std::fabs(dot) - 1.0) <= 1e-8);
    }

    // residual check straight against the fixture: C v = lambda v
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t r = 0; r < 3; ++r) {
            double av = 0.0;
            for (std::size_t c = 0; c < 3; ++c) av += fixture[r * 3 + c] * vectors.at(i, c);
            CHECK(std::fabs(av - eigenvalues[i] * vectors.at(i, r)) <= 1e-8);
        }
    }

    // orthonormality
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 3; ++k) dot += vectors.at(i, k) * vectors.at(j, k);
            CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) <= 1e-8);
        }
}

TEST_CASE("pca reconstruction error shrinks as k grows") {
    const auto fm = random_matrix(120, 6, 909);
    double previous = 1e306;
    for (std::size_t k = 1; k <= 6; ++k) {
        const auto model = preprocess::pca_fit(fm, preprocess::PcaChoice::components(k));
        const auto projected = preprocess::pca_transform(model, fm);
        // back-project and accumulate the squared error
        double err = 0.0;
        for (std::size_t r = 0; r < fm.rows(); ++r) {
            for (std::size_t c = 0; c < fm.cols(); ++c) {
                double rec = model.mean_vector[c];
                for (std::size_t z = 0; z < k; ++z)
                    rec += projected.at(r, z) * model.components.at(z, c);
                const double d = rec - fm.at(r, c);
                err += d * d;
            }
        }
        err /= static_cast<double>(fm.rows());
        CHECK(err <= previous + 1e-9);
        previous = err;

        // mean reconstruction error equals the discarded variance
        double discarded = 0.0;
        {
            std::vector<double> cov(36, 0.0);
            // recompute the full spectrum once for the bound
            const auto full = preprocess::pca_fit(fm, preprocess::PcaChoice::components(6));
            for (std::size_t z = k; z < 6; ++z) discarded += full.explained_variance[z];
        }
        CHECK(err <= discarded + 1e-8);
    }
}

TEST_CASE("pca retains the smallest k reaching the variance target") {
    // three independent axes with variances ~ 100, ~1, ~0.01
    util::Rng64 rng(55);
    core::Matrix m(4000, 3);
    for (std::size_t r = 0; r < 4000; ++r) {
        m.at(r, 0) = 10.0 * rng.next_gaussian();
        m.at(r, 1) = 1.0 * rng.next_gaussian();
        m.at(r, 2) = 0.1 * rng.next_gaussian();
    }
    const FeatureMatrix fm(std::move(m), {{"a", ColumnKind::continuous},
                                          {"b", ColumnKind::continuous},
                                          {"c", ColumnKind::continuous}});
    const auto model = preprocess::pca_fit(fm, preprocess::PcaChoice::variance_target(0.95));
    CHECK(model.components.rows == 1);
    const auto strict = preprocess::pca_fit(fm, preprocess::PcaChoice::variance_target(0.999));
    CHECK(strict.components.rows == 2);
}

TEST_CASE("pca validates its retention choice") {
    const auto fm = random_matrix(10, 3, 2);
    CHECK_THROWS_AS(preprocess::pca_fit(fm, preprocess::PcaChoice::components(0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(preprocess::pca_fit(fm, preprocess::PcaChoice::components(4)),
                    std::invalid_argument);
    CHECK_THROWS_AS(preprocess::pca_fit(fm, preprocess::PcaChoice::variance_target(0.0)),
                    std::invalid_argument);
}

TEST_CASE("pipelines replay training statistics on test data") {
    const auto train = random_matrix(200, 4, 41);
    const auto test = random_matrix(50, 4, 42);

    SUBCASE("zero_mean uses the training means") {
        const auto pipe = preprocess::Pipeline::fit(train, Variant::zero_mean,
                                                    BoolMode::bool_included);
        const auto out = pipe.apply(test);
        for (std::size_t c = 0; c < 4; ++c) {
            double train_mean = 0.0;
            for (std::size_t r = 0; r < train.rows(); ++r) train_mean += train.at(r, c);
            train_mean /= static_cast<double>(train.rows());
            for (std::size_t r = 0; r < test.rows(); ++r)
                CHECK(out.at(r, c) == doctest::Approx(test.at(r, c) - train_mean).epsilon(1e-12));
        }
    }
    SUBCASE("linear scaling can leave [0,1] on unseen data") {
        const auto pipe =
            preprocess::Pipeline::fit(train, Variant::linear, BoolMode::bool_included);
        const auto self = pipe.apply(train);
        double lo = 1e300, hi = -1e300;
        for (double v : self.data().values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
        // applying train statistics to test rows is the point: no re-fit
        const auto out = pipe.apply(test);
        bool outside = false;
        for (double v : out.data().values) outside |= (v < 0.0 || v > 1.0);
        CHECK(outside); // different sample, so some value escapes the unit box
    }
    SUBCASE("pipelines survive a save/load round trip") {
        for (Variant variant : {Variant::none, Variant::zero_mean, Variant::linear, Variant::pca}) {
            const auto pipe = preprocess::Pipeline::fit(train, variant, BoolMode::bool_included,
                                                        preprocess::PcaChoice::components(2));
            std::stringstream buffer;
            pipe.save(buffer);
            const auto loaded = preprocess::Pipeline::load(buffer);
            const auto a = pipe.apply(test);
            const auto b = loaded.apply(test);
            REQUIRE(a.cols() == b.cols());
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < a.cols(); ++c)
                    CHECK(a.at(r, c) == b.at(r, c));
        }
    }
}

TEST_CASE("boolean columns reject non-binary payloads") {
    core::Matrix m(2, 1);
    m.at(0, 0) = 0.0;
    m.at(1, 0) = 0.5;
    CHECK_THROWS_AS(FeatureMatrix(std::move(m), {{"b", ColumnKind::boolean}}),
                    std::invalid_argument);
}
