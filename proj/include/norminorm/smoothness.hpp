#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

#include "norminorm/gradients.hpp"
#include "norminorm/matrix.hpp"

namespace norminorm {

/// Both sides of the gradient-magnitude and curvature identities for the
/// batch-normalized loss, together with the scalar pieces the right-hand
/// sides are assembled from. All quantities are for q = 2.
struct SmoothnessReport {
    double b_hat = 0.0;           // centered L2 norm of the raw predictions
    double rho = 0.0;             // <S, S_hat> = linear correlation of the batches
    double lipschitz_lhs = 0.0;   // ||g_n||^2 from the analytic gradient
    double grad_norm_sq = 0.0;    // ||g||^2 (gradient w.r.t. normalized preds)
    double mean_term = 0.0;       // (1/N) <1, g>^2
    double correlation_term = 0.0;  // <g, S_hat>^2
    double lipschitz_rhs = 0.0;   // (1/b^2) * (||g||^2 - mean_term - correlation_term)
    double beta_lhs = 0.0;        // g_n^T H_n g_n via the explicit Hessian
    double beta_rhs = 0.0;        // scalar expansion of the same quantity
    double grad_h_grad = 0.0;     // g^T H g (unnormalized curvature, ratio denominator)
};

namespace detail {

inline void require_q2(const LossParams& params) {
    if (params.q != 2.0) {
        throw InvalidExponent("smoothness identities hold for q = 2 only");
    }
}

}  // namespace detail

/// K = I - (1/N)*11^T - s*s^T for a normalized batch s (q = 2). Symmetric,
/// idempotent, and annihilates both the all-ones vector and s.
inline SquareMatrix projection_matrix(const NormalizedBatch& pred_n) {
    if (pred_n.stats.q != 2.0) {
        throw InvalidExponent("projection matrix is defined for q = 2 only");
    }
    const std::size_t n = pred_n.values.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    SquareMatrix k(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            k(i, j) = (i == j ? 1.0 : 0.0) - inv_n - pred_n.values[i] * pred_n.values[j];
        }
    }
    return k;
}

/// Diagonal curvature of the residual term w.r.t. the normalized predictions:
/// H = diag((p(p-1)/c) * |s_i - t_i|^(p-2)). Defined for p > 1; for p < 2 the
/// entries blow up on exact-zero residuals, which the identity checks avoid.
inline SquareMatrix hessian_wrt_normalized(const NormalizedBatch& pred_n,
                                           const NormalizedBatch& label_n, double p,
                                           double c) {
    if (!(p > 1.0)) {
        throw InvalidExponent("residual curvature needs p > 1 (kinks at p = 1)");
    }
    const std::size_t n = pred_n.values.size();
    const double scale = p * (p - 1.0) / c;
    SquareMatrix h(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (p == 2.0) {
            h(i, i) = scale;
        } else {
            const double d = std::fabs(pred_n.values[i] - label_n.values[i]);
            h(i, i) = scale * std::pow(d, p - 2.0);
        }
    }
    return h;
}

/// Explicit Hessian of the loss w.r.t. raw predictions (q = 2):
///   H_n = (1/b^2) * (K H K - <g,s> K - s (Kg)^T - (Kg) s^T).
inline SquareMatrix hessian_wrt_scores(std::span<const double> pred,
                                       std::span<const double> label,
                                       const LossParams& params) {
    detail::require_q2(params);
    const LossOutput out = norm_in_norm(pred, label, params);
    const std::vector<double>& s = out.pred_normalized.values;
    const std::vector<double> g =
        dloss_dnormalized(out.pred_normalized, out.label_normalized, params.p, out.c);
    const SquareMatrix k = projection_matrix(out.pred_normalized);
    const SquareMatrix h =
        hessian_wrt_normalized(out.pred_normalized, out.label_normalized, params.p, out.c);
    const std::vector<double> kg = matvec(k, g);
    const double g_dot_s = detail::dot(g, s);
    const double b = out.pred_normalized.stats.centered_norm;
    const double inv_b2 = 1.0 / (b * b);

    SquareMatrix khk = matmul(matmul(k, h), k);
    const std::size_t n = pred.size();
    SquareMatrix hn(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            hn(i, j) = inv_b2 * (khk(i, j) - g_dot_s * k(i, j) - s[i] * kg[j] - kg[i] * s[j]);
        }
    }
    return hn;
}

/// Gradient-magnitude identity (q = 2, any p >= 1): the left side is the
/// squared norm of the analytic gradient; the right side is reassembled from
/// b, ||g||^2, <1,g> and <g,s>, computed independently of the gradient path.
inline SmoothnessReport lipschitz_identity(std::span<const double> pred,
                                           std::span<const double> label, double p,
                                           double tol = kDegeneracyTol) {
    LossParams params{p, 2.0, tol, 0.1};
    const LossOutput out = norm_in_norm(pred, label, params);
    const std::vector<double> g =
        dloss_dnormalized(out.pred_normalized, out.label_normalized, p, out.c);
    const std::vector<double> gn = loss_gradient(pred, label, params);

    SmoothnessReport rep;
    rep.b_hat = out.pred_normalized.stats.centered_norm;
    rep.rho = detail::dot(out.pred_normalized.values, out.label_normalized.values);
    rep.lipschitz_lhs = detail::dot(gn, gn);
    rep.grad_norm_sq = detail::dot(g, g);
    const double ones_dot_g = detail::sum_of(g);
    rep.mean_term = ones_dot_g * ones_dot_g / static_cast<double>(pred.size());
    const double g_dot_s = detail::dot(g, out.pred_normalized.values);
    rep.correlation_term = g_dot_s * g_dot_s;
    rep.lipschitz_rhs =
        (rep.grad_norm_sq - rep.mean_term - rep.correlation_term) / (rep.b_hat * rep.b_hat);
    return rep;
}

/// Curvature identity specialized to p = q = 2: the left side forms
/// g_n^T H_n g_n with the explicit Hessian; the right side is the scalar
/// expansion (1/b^4) * { g^T H g - (2/c)(1 - <S,S_hat>) * [ (4/c^2)(1 - <S,S_hat>)
/// + ||g||^2 - <g,S_hat>^2 ] }. Lipschitz fields are filled in as well.
inline SmoothnessReport beta_identity(std::span<const double> pred,
                                      std::span<const double> label,
                                      double tol = kDegeneracyTol) {
    SmoothnessReport rep = lipschitz_identity(pred, label, 2.0, tol);
    LossParams params{2.0, 2.0, tol, 0.1};
    const std::vector<double> gn = loss_gradient(pred, label, params);
    const SquareMatrix hn = hessian_wrt_scores(pred, label, params);
    rep.beta_lhs = quadratic_form(hn, gn);

    const double c = normalization_factor(pred.size(), 2.0, 2.0);
    const double u = 1.0 - rep.rho;
    rep.grad_h_grad = (2.0 / c) * rep.grad_norm_sq;
    const double bracket = (4.0 / (c * c)) * u + rep.grad_norm_sq - rep.correlation_term;
    const double b2 = rep.b_hat * rep.b_hat;
    rep.beta_rhs = (rep.grad_h_grad - (2.0 / c) * u * bracket) / (b2 * b2);
    return rep;
}

/// Intermediate curvature identity, valid for any p > 1 (q = 2):
///   g_n^T H_n g_n = (1/b^2) * { g_n^T H g_n - <g,s> * ||g_n||^2 }.
/// Returns (explicit-Hessian side, identity side).
inline std::pair<double, double> beta_intermediate(std::span<const double> pred,
                                                   std::span<const double> label, double p,
                                                   double tol = kDegeneracyTol) {
    if (!(p > 1.0)) {
        throw InvalidExponent("curvature identity needs p > 1");
    }
    LossParams params{p, 2.0, tol, 0.1};
    const LossOutput out = norm_in_norm(pred, label, params);
    const std::vector<double> g =
        dloss_dnormalized(out.pred_normalized, out.label_normalized, p, out.c);
    const std::vector<double> gn = loss_gradient(pred, label, params);
    const SquareMatrix hn = hessian_wrt_scores(pred, label, params);
    const SquareMatrix h =
        hessian_wrt_normalized(out.pred_normalized, out.label_normalized, p, out.c);
    const double lhs = quadratic_form(hn, gn);
    const double b = out.pred_normalized.stats.centered_norm;
    const double g_dot_s = detail::dot(g, out.pred_normalized.values);
    const double rhs =
        (quadratic_form(h, gn) - g_dot_s * detail::dot(gn, gn)) / (b * b);
    return {lhs, rhs};
}

/// Normalized-vs-unnormalized smoothness, the quantities the loss is meant to
/// shrink: ||g_n||^2 / ||g||^2 and g_n^T H_n g_n / g^T H g. Ratios are absent
/// (not NaN) when the denominators vanish, i.e. at a perfect fit; the
/// curvature ratio additionally needs p > 1.
struct SmoothnessComparison {
    std::optional<double> lipschitz_ratio;
    std::optional<double> beta_ratio;
    double b_hat = 0.0;
};

inline SmoothnessComparison smoothness_comparison(std::span<const double> pred,
                                                  std::span<const double> label,
                                                  const LossParams& params) {
    detail::require_q2(params);
    SmoothnessComparison cmp;
    const SmoothnessReport lip = lipschitz_identity(pred, label, params.p, params.tol);
    cmp.b_hat = lip.b_hat;
    if (lip.grad_norm_sq > 0.0) {
        cmp.lipschitz_ratio = lip.lipschitz_lhs / lip.grad_norm_sq;
    }
    if (params.p > 1.0) {
        const LossOutput out = norm_in_norm(pred, label, params);
        const std::vector<double> g =
            dloss_dnormalized(out.pred_normalized, out.label_normalized, params.p, out.c);
        const std::vector<double> gn = loss_gradient(pred, label, params);
        const SquareMatrix h = hessian_wrt_normalized(out.pred_normalized,
                                                      out.label_normalized, params.p, out.c);
        const SquareMatrix hn = hessian_wrt_scores(pred, label, params);
        const double denom = quadratic_form(h, g);
        if (denom > 0.0) {
            cmp.beta_ratio = quadratic_form(hn, gn) / denom;
        }
    }
    return cmp;
}

}  // namespace norminorm
