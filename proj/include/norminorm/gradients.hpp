#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "norminorm/loss.hpp"
#include "norminorm/matrix.hpp"

namespace norminorm {

/// Threshold below which a residual (p = 1) or normalized entry (q = 1) is
/// treated as sitting on a kink for finite-difference checking purposes.
/// The analytic subgradient stays defined everywhere; only the comparison
/// against finite differences skips these points.
inline constexpr double kKinkTol = 1e-4;

/// Gradient magnitude below which a batch is treated as a flat spot of the
/// loss.  With p = q = 1 the loss is locally constant whenever every residual
/// sign matches the sign of the normalized prediction (the aligned terms sum
/// to the unit norm), so the true gradient is exactly zero while central
/// differences return pure rounding noise (~1e-10 at step 1e-6).  A relative
/// comparison is meaningless there; such batches are reported as skipped.
inline constexpr double kFlatSpotTol = 1e-8;

/// Intermediates of the normalization Jacobian for a normalized batch s:
///   r_j  = |s_j|^(q-1) * sign(s_j)   (the derivative of the centered norm)
///   mu_r = mean of r
/// For q = 2 these reduce to r = s and mu_r = 0 (zero-mean batch).
struct NormGradientTerms {
    std::vector<double> r;
    double mu_r = 0.0;
};

namespace detail {

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// |x|^(e) * sign(x) with sign(0) := 0; exact paths for e = 0 and e = 1.
inline double signed_power(double x, double e) {
    if (e == 0.0) return sign_of(x);
    if (e == 1.0) return x;
    return std::pow(std::fabs(x), e) * sign_of(x);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double sum_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace detail

inline NormGradientTerms norm_gradient_terms(const NormalizedBatch& batch) {
    NormGradientTerms out;
    out.r.resize(batch.values.size());
    const double e = batch.stats.q - 1.0;
    for (std::size_t i = 0; i < batch.values.size(); ++i) {
        out.r[i] = detail::signed_power(batch.values[i], e);
    }
    out.mu_r = detail::mean_of(out.r);
    return out;
}

/// Gradient of the loss with respect to the normalized predictions:
/// g_i = (p/c) * |s_i - t_i|^(p-1) * sign(s_i - t_i).
inline std::vector<double> dloss_dnormalized(const NormalizedBatch& pred_n,
                                             const NormalizedBatch& label_n, double p,
                                             double c) {
    std::vector<double> g(pred_n.values.size());
    const double scale = p / c;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = pred_n.values[i] - label_n.values[i];
        g[i] = scale * detail::signed_power(d, p - 1.0);
    }
    return g;
}

/// Pull a gradient w.r.t. the normalized batch back to the raw scores using
/// the closed-form Jacobian of the normalization, in vectorized form:
///   g_n = (1/b) * { g - (1/N)*1*<1,g> - (r - mu_r*1)*<g,s> }.
inline std::vector<double> chain_through_normalization(std::span<const double> g,
                                                       const NormalizedBatch& pred_n) {
    const double b = pred_n.stats.centered_norm;
    const double n = static_cast<double>(g.size());
    const NormGradientTerms terms = norm_gradient_terms(pred_n);
    const double g_mean = detail::sum_of(g) / n;
    const double g_dot_s = detail::dot(g, pred_n.values);
    std::vector<double> out(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        out[j] = (g[j] - g_mean - (terms.r[j] - terms.mu_r) * g_dot_s) / b;
    }
    return out;
}

/// Same pullback computed entry by entry from the Jacobian
///   ds_i/dQ_j = (1/b) * { [i==j] - 1/N - s_i*(r_j - mu_r) },
/// kept as an independent O(N^2) reference route for consistency checks.
inline std::vector<double> chain_through_normalization_elementwise(
    std::span<const double> g, const NormalizedBatch& pred_n) {
    const double b = pred_n.stats.centered_norm;
    const std::size_t n = g.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const NormGradientTerms terms = norm_gradient_terms(pred_n);
    std::vector<double> out(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double jac = ((i == j ? 1.0 : 0.0) - inv_n -
                                pred_n.values[i] * (terms.r[j] - terms.mu_r)) /
                               b;
            s += g[i] * jac;
        }
        out[j] = s;
    }
    return out;
}

/// Analytic gradient of norm_in_norm with respect to the raw predictions.
inline std::vector<double> loss_gradient(std::span<const double> pred,
                                         std::span<const double> label,
                                         const LossParams& params) {
    const LossOutput out = norm_in_norm(pred, label, params);
    const std::vector<double> g =
        dloss_dnormalized(out.pred_normalized, out.label_normalized, params.p, out.c);
    return chain_through_normalization(g, out.pred_normalized);
}

/// Reference implementation of loss_gradient via the per-entry Jacobian.
inline std::vector<double> loss_gradient_elementwise(std::span<const double> pred,
                                                     std::span<const double> label,
                                                     const LossParams& params) {
    const LossOutput out = norm_in_norm(pred, label, params);
    const std::vector<double> g =
        dloss_dnormalized(out.pred_normalized, out.label_normalized, params.p, out.c);
    return chain_through_normalization_elementwise(g, out.pred_normalized);
}

/// Analytic gradient of the correlation-rescaled variant, with the
/// correlation treated as a per-batch constant (stop-gradient).
inline std::vector<double> variant_gradient(std::span<const double> pred,
                                            std::span<const double> label,
                                            const LossParams& params) {
    const LossOutput out = variant_loss(pred, label, params);
    const double rho = *out.rho_hat;
    std::vector<double> g(pred.size());
    const double scale = params.p / out.c;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = rho * out.pred_normalized.values[i] - out.label_normalized.values[i];
        g[i] = scale * rho * detail::signed_power(d, params.p - 1.0);
    }
    return chain_through_normalization(g, out.pred_normalized);
}

namespace detail {

/// Forward value of the rescaled variant with the correlation pinned to a
/// caller-supplied constant; the finite-difference oracle for variant_gradient.
inline double variant_value_frozen_rho(std::span<const double> pred,
                                       std::span<const double> label,
                                       const LossParams& params, double rho) {
    const NormalizedBatch pn = normalize(pred, params.q, params.tol);
    const NormalizedBatch ln = normalize(label, params.q, params.tol);
    const double c = normalization_factor(pred.size(), params.p, params.q);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        s += std::pow(std::fabs(rho * pn.values[i] - ln.values[i]), params.p);
    }
    return s / c;
}

}  // namespace detail

/// Central finite differences of the loss w.r.t. each raw prediction, with a
/// per-coordinate step of h * max(1, |coordinate|).
inline std::vector<double> finite_diff_gradient(std::span<const double> pred,
                                                std::span<const double> label,
                                                const LossParams& params, double h = 1e-6) {
    if (!(h > 0.0)) throw InvalidSpec("finite-difference step must be > 0");
    std::vector<double> probe(pred.begin(), pred.end());
    std::vector<double> out(pred.size());
    for (std::size_t j = 0; j < pred.size(); ++j) {
        const double hj = h * std::max(1.0, std::fabs(pred[j]));
        probe[j] = pred[j] + hj;
        const double up = norm_in_norm(probe, label, params).value;
        probe[j] = pred[j] - hj;
        const double down = norm_in_norm(probe, label, params).value;
        probe[j] = pred[j];
        out[j] = (up - down) / (2.0 * hj);
    }
    return out;
}

/// Finite-difference oracle for variant_gradient: the correlation is frozen at
/// its unperturbed value before differencing.
inline std::vector<double> finite_diff_variant_gradient(std::span<const double> pred,
                                                        std::span<const double> label,
                                                        const LossParams& params,
                                                        double h = 1e-6) {
    if (!(h > 0.0)) throw InvalidSpec("finite-difference step must be > 0");
    const double rho = *variant_loss(pred, label, params).rho_hat;
    std::vector<double> probe(pred.begin(), pred.end());
    std::vector<double> out(pred.size());
    for (std::size_t j = 0; j < pred.size(); ++j) {
        const double hj = h * std::max(1.0, std::fabs(pred[j]));
        probe[j] = pred[j] + hj;
        const double up = detail::variant_value_frozen_rho(probe, label, params, rho);
        probe[j] = pred[j] - hj;
        const double down = detail::variant_value_frozen_rho(probe, label, params, rho);
        probe[j] = pred[j];
        out[j] = (up - down) / (2.0 * hj);
    }
    return out;
}

/// Outcome of comparing the analytic gradient against finite differences.
/// Errors are measured per coordinate against the larger of the two gradient
/// magnitudes (infinity norms, floored at 1e-12) so that coordinates where
/// the true gradient happens to pass through zero do not divide
/// finite-difference round-off noise by an arbitrarily small number.
struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t tested = 0;
    std::size_t skipped = 0;
};

inline GradientCheck gradient_check(std::span<const double> pred,
                                    std::span<const double> label,
                                    const LossParams& params, double h = 1e-6) {
    const LossOutput out = norm_in_norm(pred, label, params);
    const std::vector<double> analytic = loss_gradient(pred, label, params);
    const std::vector<double> numeric = finite_diff_gradient(pred, label, params, h);

    GradientCheck check;
    // Kinks poison the whole batch, not just their own coordinate: the
    // normalization couples every entry, so perturbing any coordinate moves
    // all residuals (p = 1 kinks at s_i = t_i) and all normalized entries
    // (q = 1 kinks at s_i = 0) through the non-differentiable point.
    if (params.q == 1.0) {
        for (double s : out.pred_normalized.values) {
            if (std::fabs(s) < kKinkTol) {
                check.skipped = pred.size();
                return check;
            }
        }
    }
    if (params.p == 1.0) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double resid = out.pred_normalized.values[i] - out.label_normalized.values[i];
            if (std::fabs(resid) < kKinkTol) {
                check.skipped = pred.size();
                return check;
            }
        }
    }
    const double analytic_mag = detail::max_abs(analytic);
    const double numeric_mag = detail::max_abs(numeric);
    // Flat spot: both routes agree the gradient vanishes, but the finite
    // difference only resolves rounding noise there, so no relative
    // comparison is possible.
    if (std::max(analytic_mag, numeric_mag) < kFlatSpotTol) {
        check.skipped = pred.size();
        return check;
    }
    const double denom = std::max({analytic_mag, numeric_mag, 1e-12});
    for (std::size_t j = 0; j < pred.size(); ++j) {
        const double err = std::fabs(analytic[j] - numeric[j]) / denom;
        check.max_rel_error = std::max(check.max_rel_error, err);
        ++check.tested;
    }
    return check;
}

/// Central finite-difference Hessian of the loss w.r.t. raw predictions using
/// the four-point stencil on loss values; diagnostic oracle for the explicit
/// normalized-loss Hessian.
inline SquareMatrix finite_diff_hessian(std::span<const double> pred,
                                        std::span<const double> label,
                                        const LossParams& params, double h = 1e-4) {
    if (!(h > 0.0)) throw InvalidSpec("finite-difference step must be > 0");
    const std::size_t n = pred.size();
    std::vector<double> probe(pred.begin(), pred.end());
    const auto value_at = [&]() { return norm_in_norm(probe, label, params).value; };
    const double base = norm_in_norm(pred, label, params).value;
    SquareMatrix out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double v;
            if (i == j) {
                probe[i] = pred[i] + h;
                const double up = value_at();
                probe[i] = pred[i] - h;
                const double down = value_at();
                probe[i] = pred[i];
                v = (up - 2.0 * base + down) / (h * h);
            } else {
                probe[i] = pred[i] + h;
                probe[j] = pred[j] + h;
                const double pp = value_at();
                probe[j] = pred[j] - h;
                const double pm = value_at();
                probe[i] = pred[i] - h;
                const double mm = value_at();
                probe[j] = pred[j] + h;
                const double mp = value_at();
                probe[i] = pred[i];
                probe[j] = pred[j];
                v = (pp - pm - mp + mm) / (4.0 * h * h);
            }
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

}  // namespace norminorm
