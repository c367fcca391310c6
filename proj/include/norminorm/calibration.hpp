#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "norminorm/scorestats.hpp"

namespace norminorm {

/// Least-squares line mapping raw predictions onto the label scale.
struct CalibrationLine {
    double k1 = 1.0;  // slope
    double k2 = 0.0;  // intercept
};

/// Fit label ~ k1 * pred + k2 by least squares. The slope is undefined for
/// constant predictions (zero variance), which throws DegenerateBatch.
inline CalibrationLine lsr_fit(std::span<const double> pred, std::span<const double> label,
                               double tol = kDegeneracyTol) {
    detail::require_same_length(pred, label);
    detail::require_batch(pred, "prediction batch");
    detail::require_batch(label, "label batch");
    const double pm = detail::mean_of(pred);
    const double lm = detail::mean_of(label);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sxy += (pred[i] - pm) * (label[i] - lm);
        sxx += (pred[i] - pm) * (pred[i] - pm);
    }
    if (!(std::sqrt(sxx) > tol)) {
        throw DegenerateBatch("constant predictions: least-squares slope is undefined");
    }
    CalibrationLine line;
    line.k1 = sxy / sxx;
    line.k2 = lm - line.k1 * pm;
    return line;
}

inline std::vector<double> apply_calibration(const CalibrationLine& line,
                                             std::span<const double> pred) {
    std::vector<double> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = line.k1 * pred[i] + line.k2;
    return out;
}

/// Linear (Pearson) correlation coefficient.
inline double plcc(std::span<const double> x, std::span<const double> y,
                   double tol = kDegeneracyTol) {
    detail::require_same_length(x, y);
    detail::require_batch(x, "first batch");
    detail::require_batch(y, "second batch");
    const double mx = detail::mean_of(x);
    const double my = detail::mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(std::sqrt(sxx) > tol) || !(std::sqrt(syy) > tol)) {
        throw DegenerateBatch("correlation undefined for a (near-)constant batch");
    }
    return sxy / std::sqrt(sxx * syy);
}

namespace detail {

/// Fractional ranks (1-based); tied values share the average of the positions
/// they occupy.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        // positions i..j (0-based) share the average 1-based rank
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

/// Spearman rank-order correlation: Pearson correlation of fractional ranks.
inline double srocc(std::span<const double> x, std::span<const double> y,
                    double tol = kDegeneracyTol) {
    detail::require_same_length(x, y);
    detail::require_batch(x, "first batch");
    detail::require_batch(y, "second batch");
    const std::vector<double> rx = detail::fractional_ranks(x);
    const std::vector<double> ry = detail::fractional_ranks(y);
    return plcc(rx, ry, tol);
}

/// Root mean squared error on raw values.
inline double rmse(std::span<const double> x, std::span<const double> y) {
    detail::require_same_length(x, y);
    if (x.empty()) throw InvalidBatchSize("rmse needs a non-empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(x.size()));
}

/// RMSE of least-squares-calibrated predictions recovered from the rescaled
/// variant loss: sqrt(4 * b^2 * value / N), where b is the labels' centered
/// L2 norm. Exact only for p = q = 2, hence the exponent guard.
inline double rmse_from_variant(double label_centered_norm, double variant_value,
                                std::size_t n, double p = 2.0, double q = 2.0) {
    if (p != 2.0 || q != 2.0) {
        throw InvalidExponent("rmse_from_variant is an identity only for p = q = 2");
    }
    if (n == 0) throw InvalidBatchSize("rmse_from_variant needs n >= 1");
    return std::sqrt(4.0 * label_centered_norm * label_centered_norm * variant_value /
                     static_cast<double>(n));
}

}  // namespace norminorm
