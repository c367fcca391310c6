#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "norminorm/calibration.hpp"
#include "norminorm/loss.hpp"

using Catch::Approx;
using namespace norminorm;

namespace {
const std::vector<double> kPred{2.0, 1.0, 4.0, 3.0};
const std::vector<double> kLabel{1.0, 2.0, 3.0, 4.0};
const LossParams kP22{2.0, 2.0, kDegeneracyTol, 0.1};
}  // namespace

TEST_CASE("normalization factor follows the two-regime formula", "[loss]") {
    REQUIRE(normalization_factor(4, 2.0, 2.0) == 4.0);    // p == q: 2^p
    REQUIRE(normalization_factor(7, 2.0, 2.0) == 4.0);    // independent of N
    REQUIRE(normalization_factor(4, 1.0, 2.0) == 4.0);    // 2 * 4^(1/2)
    REQUIRE(normalization_factor(10, 2.0, 1.0) == 4.0);   // p > q: still 2^p
    REQUIRE(normalization_factor(9, 1.0, 2.0) == 6.0);    // 2 * 9^(1/2)
    REQUIRE_THROWS_AS(normalization_factor(1, 2.0, 2.0), InvalidBatchSize);
    REQUIRE_THROWS_AS(normalization_factor(4, 0.5, 2.0), InvalidExponent);
}

TEST_CASE("worked example: loss value, factor, and normalized batches", "[loss]") {
    const LossOutput out = norm_in_norm(kPred, kLabel, kP22);
    REQUIRE(out.c == 4.0);
    REQUIRE(out.value == Approx(0.2).margin(1e-12));
    REQUIRE(out.pred_normalized.stats.mean == 2.5);
    REQUIRE(out.pred_normalized.stats.centered_norm == Approx(std::sqrt(5.0)).margin(1e-12));
    REQUIRE_FALSE(out.rho_hat.has_value());
}

TEST_CASE("worked example: correlation-rescaled variant", "[loss]") {
    const LossOutput out = variant_loss(kPred, kLabel, kP22);
    REQUIRE(out.rho_hat.has_value());
    REQUIRE(*out.rho_hat == Approx(0.6).margin(1e-12));
    REQUIRE(out.value == Approx(0.16).margin(1e-12));
}

TEST_CASE("worked example: combined loss adds the weighted variant", "[loss]") {
    REQUIRE(combined_loss(kPred, kLabel, kP22) == Approx(0.216).margin(1e-12));
}

TEST_CASE("baseline objectives on the worked example", "[loss]") {
    REQUIRE(mae(kPred, kLabel) == 1.0);
    REQUIRE(mse(kPred, kLabel) == 1.0);
}

TEST_CASE("p=q=2 loss equals (1 - correlation)/2", "[loss]") {
    const double l = norm_in_norm(kPred, kLabel, kP22).value;
    const double rho = plcc(kPred, kLabel);
    REQUIRE(l == Approx((1.0 - rho) / 2.0).margin(1e-12));
    // perfectly anti-correlated batches sit exactly at the upper bound
    const std::vector<double> rev{4.0, 3.0, 2.0, 1.0};
    REQUIRE(norm_in_norm(rev, kLabel, kP22).value == Approx(1.0).margin(1e-12));
}

TEST_CASE("loss is invariant to positive-slope affine maps of predictions", "[loss]") {
    std::vector<double> mapped(kPred.size());
    for (std::size_t i = 0; i < kPred.size(); ++i) mapped[i] = 3.0 * kPred[i] - 7.0;
    for (const double p : {1.0, 2.0}) {
        for (const double q : {1.0, 2.0}) {
            const LossParams params{p, q, kDegeneracyTol, 0.1};
            const double base = norm_in_norm(kPred, kLabel, params).value;
            REQUIRE(norm_in_norm(mapped, kLabel, params).value ==
                    Approx(base).margin(1e-12));
        }
    }
}

TEST_CASE("loss is invariant to rescaling the labels", "[loss]") {
    std::vector<double> scaled(kLabel.size());
    for (std::size_t i = 0; i < kLabel.size(); ++i) scaled[i] = 100.0 * kLabel[i];
    for (const double p : {1.0, 2.0}) {
        for (const double q : {1.0, 2.0}) {
            const LossParams params{p, q, kDegeneracyTol, 0.1};
            const double base = norm_in_norm(kPred, kLabel, params).value;
            REQUIRE(norm_in_norm(kPred, scaled, params).value ==
                    Approx(base).margin(1e-12));
        }
    }
}

TEST_CASE("loss is symmetric in its arguments when p == q", "[loss]") {
    for (const double pq : {1.0, 2.0}) {
        const LossParams params{pq, pq, kDegeneracyTol, 0.1};
        const double ab = norm_in_norm(kPred, kLabel, params).value;
        const double ba = norm_in_norm(kLabel, kPred, params).value;
        REQUIRE(ab == Approx(ba).margin(1e-12));
    }
}

TEST_CASE("rescaled variant never exceeds the base loss (p=q=2)", "[loss]") {
    const double l = norm_in_norm(kPred, kLabel, kP22).value;
    const double lv = variant_loss(kPred, kLabel, kP22).value;
    REQUIRE(lv <= l + 1e-12);
}

TEST_CASE("loss stays within [0, 1] on a hostile batch", "[loss]") {
    const std::vector<double> pred{100.0, 0.0, 100.0, 0.0};
    const std::vector<double> label{0.0, 100.0, 0.0, 100.0};
    for (const double p : {1.0, 2.0}) {
        for (const double q : {1.0, 2.0}) {
            const LossParams params{p, q, kDegeneracyTol, 0.1};
            const double l = norm_in_norm(pred, label, params).value;
            REQUIRE(l >= 0.0);
            REQUIRE(l <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("perfect (affine) fit gives zero loss", "[loss]") {
    const std::vector<double> pred{3.0, 5.0, 7.0, 9.0};  // 2 * label + 1
    const std::vector<double> label{1.0, 2.0, 3.0, 4.0};
    REQUIRE(norm_in_norm(pred, label, kP22).value == 0.0);
}

TEST_CASE("loss input validation", "[loss]") {
    const LossParams params{};
    REQUIRE_THROWS_AS(norm_in_norm(std::vector<double>{1.0, 2.0}, kLabel, params),
                      LengthMismatch);
    REQUIRE_THROWS_AS(
        norm_in_norm(std::vector<double>{5.0, 5.0, 5.0, 5.0}, kLabel, params),
        DegenerateBatch);
    REQUIRE_THROWS_AS(norm_in_norm(std::vector<double>{1.0}, std::vector<double>{2.0}, params),
                      InvalidBatchSize);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(
        norm_in_norm(std::vector<double>{1.0, nan, 3.0, 4.0}, kLabel, params),
        NonFiniteInput);
    const LossParams bad_p{0.0, 2.0, kDegeneracyTol, 0.1};
    REQUIRE_THROWS_AS(norm_in_norm(kPred, kLabel, bad_p), InvalidExponent);
    REQUIRE_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), InvalidBatchSize);
    REQUIRE_THROWS_AS(mse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                      LengthMismatch);
}
