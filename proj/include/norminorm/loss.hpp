#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

#include "norminorm/scorestats.hpp"

namespace norminorm {

/// Exponents and knobs shared by the loss family.
///   p: exponent applied to the residuals of the normalized batches.
///   q: exponent of the centering norm used to normalize each batch.
///   tol: degeneracy threshold forwarded to normalize().
///   variant_weight: weight of the correlation-rescaled term in combined_loss.
struct LossParams {
    double p = 1.0;
    double q = 2.0;
    double tol = kDegeneracyTol;
    double variant_weight = 0.1;
};

/// Forward-pass result. `c` is the normalization factor that maps the raw
/// residual power sum into [0, 1]. The normalized batches are kept so
/// downstream gradient/diagnostic code does not recompute them. `rho_hat`
/// is the linear correlation used by the rescaled variant (set only there).
struct LossOutput {
    double value = 0.0;
    double c = 0.0;
    NormalizedBatch pred_normalized;
    NormalizedBatch label_normalized;
    std::optional<double> rho_hat;
};

/// Upper-bound factor for the residual power sum of two normalized batches:
/// 2^p * N^(1 - p/q) when p < q, otherwise 2^p. Dividing by it keeps the
/// loss in [0, 1] for any batch.
inline double normalization_factor(std::size_t n, double p, double q) {
    if (n < 2) {
        throw InvalidBatchSize("normalization_factor needs n >= 2");
    }
    detail::require_exponent(p, "p");
    detail::require_exponent(q, "q");
    if (p < q) {
        return std::pow(2.0, p) * std::pow(static_cast<double>(n), 1.0 - p / q);
    }
    return std::pow(2.0, p);
}

namespace detail {

/// sum_i |a_i - b_i|^p with exact paths for p = 1 and p = 2.
inline double residual_power_sum(std::span<const double> a, std::span<const double> b,
                                 double p) {
    double s = 0.0;
    if (p == 1.0) {
        for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    } else if (p == 2.0) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) {
            s += std::pow(std::fabs(a[i] - b[i]), p);
        }
    }
    return s;
}

/// Linear (Pearson) correlation of two batches. Kept local to the loss so the
/// metric module stays an independent cross-check of the same quantity.
inline double pearson_unchecked(std::span<const double> x, std::span<const double> y) {
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

inline void require_pair(std::span<const double> pred, std::span<const double> label) {
    require_same_length(pred, label);
    require_batch(pred, "prediction batch");
    require_batch(label, "label batch");
}

}  // namespace detail

/// Batch-normalized regression loss: normalize predictions and labels to zero
/// mean and unit L^q centered norm, then average the p-th power of their
/// elementwise residuals, scaled by 1/c so the value lies in [0, 1].
inline LossOutput norm_in_norm(std::span<const double> pred, std::span<const double> label,
                               const LossParams& params) {
    detail::require_pair(pred, label);
    LossOutput out;
    out.pred_normalized = normalize(pred, params.q, params.tol);
    out.label_normalized = normalize(label, params.q, params.tol);
    out.c = normalization_factor(pred.size(), params.p, params.q);
    out.value = detail::residual_power_sum(out.pred_normalized.values,
                                           out.label_normalized.values, params.p) /
                out.c;
    return out;
}

/// Variant that rescales the normalized predictions by their linear
/// correlation with the normalized labels before taking residuals. The
/// correlation is treated as a constant by the gradient code.
inline LossOutput variant_loss(std::span<const double> pred, std::span<const double> label,
                               const LossParams& params) {
    detail::require_pair(pred, label);
    LossOutput out;
    out.pred_normalized = normalize(pred, params.q, params.tol);
    out.label_normalized = normalize(label, params.q, params.tol);
    out.c = normalization_factor(pred.size(), params.p, params.q);
    const double rho = detail::pearson_unchecked(out.pred_normalized.values,
                                                 out.label_normalized.values);
    out.rho_hat = rho;

    double s = 0.0;
    const std::span<const double> sp(out.pred_normalized.values);
    const std::span<const double> sl(out.label_normalized.values);
    if (params.p == 1.0) {
        for (std::size_t i = 0; i < sp.size(); ++i) s += std::fabs(rho * sp[i] - sl[i]);
    } else if (params.p == 2.0) {
        for (std::size_t i = 0; i < sp.size(); ++i) {
            const double d = rho * sp[i] - sl[i];
            s += d * d;
        }
    } else {
        for (std::size_t i = 0; i < sp.size(); ++i) {
            s += std::pow(std::fabs(rho * sp[i] - sl[i]), params.p);
        }
    }
    out.value = s / out.c;
    return out;
}

/// norm_in_norm plus variant_weight times the rescaled variant.
inline double combined_loss(std::span<const double> pred, std::span<const double> label,
                            const LossParams& params) {
    return norm_in_norm(pred, label, params).value +
           params.variant_weight * variant_loss(pred, label, params).value;
}

/// Mean absolute error on raw scores (baseline objective).
inline double mae(std::span<const double> pred, std::span<const double> label) {
    detail::require_same_length(pred, label);
    if (pred.empty()) throw InvalidBatchSize("mae needs a non-empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - label[i]);
    return s / static_cast<double>(pred.size());
}

/// Mean squared error on raw scores (baseline objective).
inline double mse(std::span<const double> pred, std::span<const double> label) {
    detail::require_same_length(pred, label);
    if (pred.empty()) throw InvalidBatchSize("mse needs a non-empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - label[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

}  // namespace norminorm
