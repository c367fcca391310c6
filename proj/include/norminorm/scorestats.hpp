#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "norminorm/errors.hpp"

namespace norminorm {

/// Default threshold below which a centered norm counts as degenerate.
inline constexpr double kDegeneracyTol = 1e-8;

/// Per-batch location/scale summary: mean and the L^q norm of the
/// mean-centered scores.
struct BatchStats {
    double mean = 0.0;
    double centered_norm = 0.0;
    double q = 2.0;
};

/// A batch mapped to zero mean and unit L^q centered norm, together with the
/// statistics that produced it (needed to undo or differentiate the mapping).
struct NormalizedBatch {
    std::vector<double> values;
    BatchStats stats;
};

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NonFiniteInput(std::string(what) + " contains a non-finite value");
        }
    }
}

inline void require_batch(std::span<const double> scores, const char* what) {
    if (scores.size() < 2) {
        throw InvalidBatchSize(std::string(what) + " needs at least 2 entries, got " +
                               std::to_string(scores.size()));
    }
    require_finite(scores, what);
}

inline void require_exponent(double p, const char* name) {
    if (!(std::isfinite(p) && p >= 1.0)) {
        throw InvalidExponent(std::string(name) + " must be finite and >= 1");
    }
}

inline void require_same_length(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw LengthMismatch("sequence lengths differ: " + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()));
    }
}

/// sum_i |v_i|^p raised to 1/p, with exact paths for p = 1 and p = 2.
/// No exponent validation; callers check their own preconditions.
inline double lp_norm_unchecked(std::span<const double> v, double p) {
    if (p == 1.0) {
        double s = 0.0;
        for (double x : v) s += std::fabs(x);
        return s;
    }
    if (p == 2.0) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }
    double s = 0.0;
    for (double x : v) s += std::pow(std::fabs(x), p);
    return std::pow(s, 1.0 / p);
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

/// L^p norm of a vector, p >= 1.
inline double lp_norm(std::span<const double> v, double p) {
    detail::require_exponent(p, "p");
    detail::require_finite(v, "lp_norm input");
    return detail::lp_norm_unchecked(v, p);
}

/// Mean and centered L^q norm of a batch of at least two finite scores.
inline BatchStats batch_stats(std::span<const double> scores, double q) {
    detail::require_batch(scores, "score batch");
    detail::require_exponent(q, "q");
    const double mean = detail::mean_of(scores);
    std::vector<double> centered(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) centered[i] = scores[i] - mean;
    return BatchStats{mean, detail::lp_norm_unchecked(centered, q), q};
}

/// Subtract the batch mean and divide by the centered L^q norm.
/// Throws DegenerateBatch when the centered norm is <= tol (constant batch).
inline NormalizedBatch normalize(std::span<const double> scores, double q,
                                 double tol = kDegeneracyTol) {
    BatchStats stats = batch_stats(scores, q);
    if (!(stats.centered_norm > tol)) {
        throw DegenerateBatch("centered L^q norm " + std::to_string(stats.centered_norm) +
                              " is below tolerance; batch is (near-)constant");
    }
    NormalizedBatch out;
    out.values.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out.values[i] = (scores[i] - stats.mean) / stats.centered_norm;
    }
    out.stats = stats;
    return out;
}

/// Result of checking ||x||_p2 <= ||x||_p1 <= N^(1/p1 - 1/p2) * ||x||_p2.
/// Slacks are the two inequality margins; both must be non-negative (up to
/// rounding) for the bound to hold.
struct NormInequality {
    bool holds = false;
    double lower_slack = 0.0;  // ||x||_p1 - ||x||_p2
    double upper_slack = 0.0;  // N^(1/p1 - 1/p2) * ||x||_p2 - ||x||_p1
};

/// Evaluate the norm comparison bound for 0 < p1 <= p2.
inline NormInequality norm_inequality(std::span<const double> v, double p1, double p2) {
    if (!(std::isfinite(p1) && std::isfinite(p2) && p1 > 0.0 && p1 <= p2)) {
        throw InvalidExponent("norm_inequality requires 0 < p1 <= p2");
    }
    if (v.empty()) {
        throw InvalidBatchSize("norm_inequality needs a non-empty vector");
    }
    detail::require_finite(v, "norm_inequality input");
    const double n1 = detail::lp_norm_unchecked(v, p1);
    const double n2 = detail::lp_norm_unchecked(v, p2);
    const double factor = std::pow(static_cast<double>(v.size()), 1.0 / p1 - 1.0 / p2);
    NormInequality out;
    out.lower_slack = n1 - n2;
    out.upper_slack = factor * n2 - n1;
    const double rounding = 1e-12 * (1.0 + n1 + n2);
    out.holds = out.lower_slack >= -rounding && out.upper_slack >= -rounding;
    return out;
}

}  // namespace norminorm
