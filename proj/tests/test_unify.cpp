#include <doctest.h>

#include "support.hpp"
#include "unprompt/error.hpp"
#include "unprompt/unify.hpp"

using namespace unprompt;
using namespace testing_support;

TEST_SUITE("attribute_unifier") {

TEST_CASE("single column standardization") {
    const UnifiedAttributes u = unify(Matrix((Matrix(3, 1) << 1, 2, 3).finished()), 1);
    const double s = std::sqrt(1.5);
    CHECK(u.values(0, 0) == doctest::Approx(-s).epsilon(1e-12));
    CHECK(std::abs(u.values(1, 0)) < 1e-12);
    CHECK(u.values(2, 0) == doctest::Approx(s).epsilon(1e-12));
    CHECK(u.values(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("constant column clamps std and comes out zero") {
    const UnifiedAttributes u = unify(Matrix::Constant(4, 1, 2.5), 1);
    CHECK(u.col_std(0) == kStdFloor);
    CHECK(u.values.isZero(0));
}

TEST_CASE("default dimensionality is 8") { CHECK(kDefaultDPrime == 8); }

TEST_CASE("narrow attributes are zero-padded") {
    Rng rng(1);
    const Matrix x = rng.normal_matrix(30, 3);
    const UnifiedAttributes u = unify(x, 8);
    CHECK(u.values.rows() == 30);
    CHECK(u.values.cols() == 8);
    CHECK(u.original_dim == 3);
    CHECK(u.basis.rows() == 8);
    // Only three directions carry variance.
    int live = 0;
    for (Index j = 0; j < 8; ++j) live += u.col_std(j) > 1e-6;
    CHECK(live == 3);
}

TEST_CASE("rank errors") {
    CHECK_THROWS_AS(unify(Matrix::Ones(3, 10), 4), Error);
    CHECK_THROWS_AS(unify(Matrix::Ones(3, 10), 0), Error);
}

TEST_CASE("column statistics after normalization") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 10 + static_cast<Index>(rng.below(60));
        const Index d = 2 + static_cast<Index>(rng.below(30));
        const Matrix x = rng.normal_matrix(n, d, rng.uniform(0.1, 20)).array() + rng.uniform(-50, 50);
        const UnifiedAttributes u = unify(x, std::min<Index>(8, n));
        const Vector mean = column_means(u.values), std = column_stds(u.values);
        for (Index j = 0; j < u.values.cols(); ++j) {
            if (u.col_std(j) <= kStdFloor) continue;
            CHECK(std::abs(mean(j)) < 1e-9);
            CHECK(std::abs(std(j) - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("unify is bit-for-bit deterministic") {
    Rng rng(12);
    const Matrix x = rng.normal_matrix(40, 13);
    CHECK(unify(x, 8).values == unify(x, 8).values);
}

TEST_CASE("normalization can be switched off") {
    Rng rng(13);
    const Matrix x = rng.normal_matrix(25, 6).array() + 5.0;
    const UnifiedAttributes raw = unify(x, 4, {.normalize = false});
    CHECK_FALSE(raw.normalized);
    CHECK((raw.values - x * raw.basis.topRows(6)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("distribution_vector") {
    CHECK(distribution_vector((Matrix(2, 1) << 1, 3).finished()) == Eigen::Vector2d(2, 1));
    Rng rng(3);
    const Matrix x = rng.normal_matrix(30, 5);
    const UnifiedAttributes u = unify(x, 4);
    const Vector v = distribution_vector(u.values);
    CHECK(v.head(4).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((v.tail(4).array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK(distribution_vector(x) == distribution_vector(x));
}

TEST_CASE("distribution_similarity") {
    Rng rng(21);
    const Matrix a = rng.normal_matrix(50, 20).array() * 4.0 + 1.0;
    const Matrix b = rng.normal_matrix(80, 7).array() - 3.0;
    CHECK(distribution_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    const Matrix ua = unify(a, 6).values, ub = unify(b, 6).values;
    CHECK(std::abs(distribution_similarity(ua, ub) - 1.0) < 1e-9);
    CHECK_THROWS_AS(distribution_similarity(ua, unify(b, 5).values), Error);
}

}
