#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "norminorm/scorestats.hpp"

using Catch::Approx;
using namespace norminorm;

TEST_CASE("batch_stats computes mean and centered L2 norm", "[scorestats]") {
    const std::vector<double> batch{1.0, 2.0, 3.0};
    const BatchStats s = batch_stats(batch, 2.0);
    REQUIRE(s.mean == 2.0);
    REQUIRE(s.centered_norm == std::sqrt(2.0));
    REQUIRE(s.q == 2.0);
}

TEST_CASE("batch_stats computes centered L1 norm", "[scorestats]") {
    const std::vector<double> batch{0.0, 0.0, 4.0};
    const BatchStats s = batch_stats(batch, 1.0);
    REQUIRE(s.mean == Approx(4.0 / 3.0).margin(1e-15));
    REQUIRE(s.centered_norm == Approx(16.0 / 3.0).margin(1e-12));
}

TEST_CASE("normalize produces the expected L1-normalized values", "[scorestats]") {
    const std::vector<double> batch{0.0, 0.0, 4.0};
    const NormalizedBatch nb = normalize(batch, 1.0);
    REQUIRE(nb.values.size() == 3);
    REQUIRE(nb.values[0] == Approx(-0.25).margin(1e-12));
    REQUIRE(nb.values[1] == Approx(-0.25).margin(1e-12));
    REQUIRE(nb.values[2] == Approx(0.5).margin(1e-12));
}

TEST_CASE("normalize postconditions: zero mean, unit centered norm", "[scorestats]") {
    const std::vector<double> batch{12.5, -3.0, 88.0, 41.75, 6.25};
    for (const double q : {1.0, 2.0}) {
        const NormalizedBatch nb = normalize(batch, q);
        REQUIRE(std::fabs(detail::mean_of(nb.values)) < 1e-12);
        REQUIRE(detail::lp_norm_unchecked(nb.values, q) == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("normalize is invariant to positive affine maps of the input", "[scorestats]") {
    const std::vector<double> batch{3.0, 1.0, 4.0, 1.5};
    std::vector<double> mapped(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) mapped[i] = 2.5 * batch[i] - 7.0;
    const NormalizedBatch a = normalize(batch, 2.0);
    const NormalizedBatch b = normalize(mapped, 2.0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        REQUIRE(b.values[i] == Approx(a.values[i]).margin(1e-12));
    }
}

TEST_CASE("normalize rejects (near-)constant batches", "[scorestats]") {
    REQUIRE_THROWS_AS(normalize(std::vector<double>{5.0, 5.0, 5.0}, 2.0), DegenerateBatch);
    REQUIRE_THROWS_AS(normalize(std::vector<double>{0.0, 0.0, 1e-9}, 2.0), DegenerateBatch);
}

TEST_CASE("batch validation errors", "[scorestats]") {
    REQUIRE_THROWS_AS(batch_stats(std::vector<double>{1.0}, 2.0), InvalidBatchSize);
    REQUIRE_THROWS_AS(batch_stats(std::vector<double>{}, 2.0), InvalidBatchSize);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(batch_stats(std::vector<double>{1.0, nan}, 2.0), NonFiniteInput);
    const double inf = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(normalize(std::vector<double>{1.0, inf}, 2.0), NonFiniteInput);
    REQUIRE_THROWS_AS(batch_stats(std::vector<double>{1.0, 2.0}, 0.5), InvalidExponent);
    REQUIRE_THROWS_AS(lp_norm(std::vector<double>{1.0, 2.0}, 0.0), InvalidExponent);
}

TEST_CASE("lp_norm basics and homogeneity", "[scorestats]") {
    REQUIRE(lp_norm(std::vector<double>{3.0, 4.0}, 2.0) == 5.0);
    REQUIRE(lp_norm(std::vector<double>{1.0, -2.0, 3.0}, 1.0) == 6.0);
    const std::vector<double> v{0.5, -1.25, 2.0};
    std::vector<double> kv(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) kv[i] = -3.0 * v[i];
    REQUIRE(lp_norm(kv, 3.0) == Approx(3.0 * lp_norm(v, 3.0)).epsilon(1e-12));
}

TEST_CASE("norm inequality holds with computable slacks", "[scorestats]") {
    const std::vector<double> v{3.0, 4.0};
    const NormInequality r = norm_inequality(v, 1.0, 2.0);
    REQUIRE(r.holds);
    REQUIRE(r.lower_slack == Approx(2.0).margin(1e-12));                        // 7 - 5
    REQUIRE(r.upper_slack == Approx(std::sqrt(2.0) * 5.0 - 7.0).margin(1e-12));
}

TEST_CASE("norm inequality collapses to equality when p1 == p2", "[scorestats]") {
    const std::vector<double> v{1.0, -2.0, 0.5};
    const NormInequality r = norm_inequality(v, 1.7, 1.7);
    REQUIRE(r.holds);
    REQUIRE(std::fabs(r.lower_slack) < 1e-12);
    REQUIRE(std::fabs(r.upper_slack) < 1e-12);
}

TEST_CASE("norm inequality accepts exponents below one", "[scorestats]") {
    const std::vector<double> v{1.0, 2.0, -0.25};
    REQUIRE(norm_inequality(v, 0.3, 2.5).holds);
}

TEST_CASE("norm inequality argument validation", "[scorestats]") {
    const std::vector<double> v{1.0, 2.0};
    REQUIRE_THROWS_AS(norm_inequality(v, 2.0, 1.0), InvalidExponent);
    REQUIRE_THROWS_AS(norm_inequality(v, 0.0, 1.0), InvalidExponent);
    REQUIRE_THROWS_AS(norm_inequality(std::vector<double>{}, 1.0, 2.0), InvalidBatchSize);
}
