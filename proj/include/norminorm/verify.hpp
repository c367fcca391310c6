#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "norminorm/calibration.hpp"
#include "norminorm/dataset.hpp"
#include "norminorm/gradients.hpp"
#include "norminorm/loss.hpp"
#include "norminorm/model.hpp"
#include "norminorm/optimizer.hpp"
#include "norminorm/rng.hpp"
#include "norminorm/scorestats.hpp"
#include "norminorm/smoothness.hpp"
#include "norminorm/trainer.hpp"

namespace norminorm {

/// One named property check over `samples` random instances. `worst` is the
/// extreme statistic observed (usually the max error), `bound` what it was
/// required to stay within.
struct CheckResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;
    double bound = 0.0;
    std::size_t samples = 0;
    std::string note;
};

struct VerifyReport {
    std::vector<CheckResult> checks;

    bool all_passed() const {
        for (const CheckResult& c : checks) {
            if (!c.passed) return false;
        }
        return true;
    }
};

namespace detail {

inline std::vector<double> random_batch(std::mt19937_64& g, std::size_t n, double scale) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(g, 0.0, scale);
    return v;
}

inline constexpr std::size_t kBatchSizes[] = {4, 8, 16};
inline constexpr double kScales[] = {1.0, 5.0, 100.0};
inline constexpr double kPqPairs[][2] = {{1, 1}, {1, 2}, {2, 1}, {2, 2}};

inline double rel_gap(double lhs, double rhs, double floor_at) {
    return std::fabs(lhs - rhs) / std::max(std::fabs(lhs), floor_at);
}

/// Max-abs difference between two vectors, relative to their joint scale.
inline double vector_rel_gap(std::span<const double> a, std::span<const double> b) {
    const double denom = std::max({max_abs(a), max_abs(b), 1e-12});
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
    }
    return worst;
}

// ---- scorestats ------------------------------------------------------------

inline CheckResult check_normalize_postconditions(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"scorestats.normalize_postconditions", false, 0.0, 1e-9, samples, ""};
    for (std::size_t s = 0; s < samples; ++s) {
        const double q = (s % 2 == 0) ? 2.0 : 1.0;
        const std::size_t n = 2 + bounded(g, 31);
        const std::vector<double> batch = random_batch(g, n, kScales[s % 3]);
        NormalizedBatch nb;
        try {
            nb = normalize(batch, q);
        } catch (const DegenerateBatch&) {
            continue;
        }
        const double mean_err = std::fabs(mean_of(nb.values));
        const double norm_err = std::fabs(lp_norm_unchecked(nb.values, q) - 1.0);
        r.worst = std::max({r.worst, mean_err, norm_err});
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_normalize_affine_invariance(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"scorestats.affine_invariance", false, 0.0, 1e-9, samples, ""};
    for (std::size_t s = 0; s < samples; ++s) {
        const double q = (s % 2 == 0) ? 2.0 : 1.0;
        const std::size_t n = 2 + bounded(g, 15);
        const std::vector<double> batch = random_batch(g, n, kScales[s % 3]);
        const double k1 = (s % 2 == 0 ? 1.0 : -1.0) * uniform(g, 0.5, 3.0);
        const double k2 = uniform(g, -100.0, 100.0);
        std::vector<double> mapped(n);
        for (std::size_t i = 0; i < n; ++i) mapped[i] = k1 * batch[i] + k2;
        try {
            const NormalizedBatch base = normalize(batch, q);
            const NormalizedBatch moved = normalize(mapped, q);
            const double sign = k1 < 0.0 ? -1.0 : 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                r.worst = std::max(r.worst, std::fabs(moved.values[i] - sign * base.values[i]));
            }
        } catch (const DegenerateBatch&) {
            continue;
        }
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_lp_norm_homogeneity(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"scorestats.lp_norm_homogeneity", false, 0.0, 1e-12, samples, ""};
    constexpr double ps[] = {1.0, 1.5, 2.0, 3.7};
    for (std::size_t s = 0; s < samples; ++s) {
        const double p = ps[s % 4];
        const std::size_t n = 1 + bounded(g, 32);
        std::vector<double> v(n);
        for (double& x : v) x = uniform(g, -50.0, 50.0);
        double k = uniform(g, -10.0, 10.0);
        if (std::fabs(k) < 0.1) k = 0.1;
        std::vector<double> kv(n);
        for (std::size_t i = 0; i < n; ++i) kv[i] = k * v[i];
        const double lhs = lp_norm(kv, p);
        const double rhs = std::fabs(k) * lp_norm(v, p);
        r.worst = std::max(r.worst, rel_gap(lhs, rhs, 1e-12));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_norm_inequality(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    const std::size_t draws = samples * 10;
    CheckResult r{"scorestats.norm_inequality", true, 0.0, 0.0, draws,
                  "worst = most negative slack"};
    double min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < draws; ++s) {
        const std::size_t n = 1 + bounded(g, 32);
        std::vector<double> v(n);
        for (double& x : v) x = uniform(g, -50.0, 50.0);
        const double p1 = uniform(g, 0.3, 4.0);
        const double p2 = uniform(g, p1, 4.0);
        const NormInequality ineq = norm_inequality(v, p1, p2);
        min_slack = std::min({min_slack, ineq.lower_slack, ineq.upper_slack});
        if (!ineq.holds) r.passed = false;
    }
    r.worst = min_slack;
    return r;
}

// ---- loss ------------------------------------------------------------------

inline CheckResult check_loss_range(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    const std::size_t draws = samples * 10;
    CheckResult r{"loss.range_c_bound", false, 0.0, 1.0 + 1e-12, draws,
                  "all four (p,q) in {1,2}^2 per draw"};
    double max_l = 0.0, min_l = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < draws; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const double scale = kScales[s % 3];
        const std::vector<double> pred = random_batch(g, n, scale);
        const std::vector<double> label = random_batch(g, n, scale);
        for (const auto& pq : kPqPairs) {
            const LossParams params{pq[0], pq[1], kDegeneracyTol, 0.1};
            const double l = norm_in_norm(pred, label, params).value;
            max_l = std::max(max_l, l);
            min_l = std::min(min_l, l);
        }
    }
    r.worst = max_l;
    r.passed = min_l >= 0.0 && max_l <= r.bound;
    return r;
}

inline CheckResult check_loss_linear_invariance(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"loss.linear_invariance", false, 0.0, 1e-12, samples,
                  "positive-slope affine map of predictions"};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const double k1 = uniform(g, 0.1, 5.0);
        const double k2 = uniform(g, -50.0, 50.0);
        std::vector<double> mapped(n);
        for (std::size_t i = 0; i < n; ++i) mapped[i] = k1 * pred[i] + k2;
        for (const auto& pq : kPqPairs) {
            const LossParams params{pq[0], pq[1], kDegeneracyTol, 0.1};
            const double base = norm_in_norm(pred, label, params).value;
            const double moved = norm_in_norm(mapped, label, params).value;
            r.worst = std::max(r.worst, std::fabs(base - moved));
        }
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_loss_label_scale(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"loss.label_scale_invariance", false, 0.0, 1e-12, samples, ""};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        std::vector<double> label = random_batch(g, n, kScales[s % 3]);
        std::vector<double> scaled(label);
        for (double& v : scaled) v *= 100.0;
        for (const auto& pq : kPqPairs) {
            const LossParams params{pq[0], pq[1], kDegeneracyTol, 0.1};
            const double base = norm_in_norm(pred, label, params).value;
            const double moved = norm_in_norm(pred, scaled, params).value;
            r.worst = std::max(r.worst, std::fabs(base - moved));
        }
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_loss_symmetry(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"loss.symmetry_p_equals_q", false, 0.0, 1e-12, samples, ""};
    for (std::size_t s = 0; s < samples; ++s) {
        const double pq = (s % 2 == 0) ? 2.0 : 1.0;
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> a = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> b = random_batch(g, n, kScales[(s + 2) % 3]);
        const LossParams params{pq, pq, kDegeneracyTol, 0.1};
        const double ab = norm_in_norm(a, b, params).value;
        const double ba = norm_in_norm(b, a, params).value;
        r.worst = std::max(r.worst, std::fabs(ab - ba));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_plcc_bridge(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"loss.plcc_bridge", false, 0.0, 1e-12, samples,
                  "p=q=2: loss equals (1 - correlation)/2"};
    const LossParams params{2.0, 2.0, kDegeneracyTol, 0.1};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const double l = norm_in_norm(pred, label, params).value;
        const double rho = plcc(pred, label);
        r.worst = std::max(r.worst, std::fabs(l - (1.0 - rho) / 2.0));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_variant_dominance(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"loss.variant_dominance", false, 0.0, 1e-12, samples,
                  "p=q=2: rescaled variant never exceeds the base loss"};
    const LossParams params{2.0, 2.0, kDegeneracyTol, 0.1};
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const double l = norm_in_norm(pred, label, params).value;
        const double lv = variant_loss(pred, label, params).value;
        worst = std::max(worst, lv - l);
    }
    r.worst = worst;
    r.passed = worst <= r.bound;
    return r;
}

// ---- gradients -------------------------------------------------------------

inline CheckResult check_chain_rule_consistency(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"gradients.chain_rule_consistency", false, 0.0, 1e-12, samples,
                  "vectorized vs per-entry Jacobian route"};
    for (std::size_t s = 0; s < samples; ++s) {
        const auto& pq = kPqPairs[s % 4];
        const LossParams params{pq[0], pq[1], kDegeneracyTol, 0.1};
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const std::vector<double> fast = loss_gradient(pred, label, params);
        const std::vector<double> slow = loss_gradient_elementwise(pred, label, params);
        r.worst = std::max(r.worst, vector_rel_gap(fast, slow));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_gradient_structure(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"gradients.zero_sum_and_orthogonality", false, 0.0, 1e-12, samples,
                  "q=2: sum(g_n)=0 and <g_n, S_hat>=0"};
    for (std::size_t s = 0; s < samples; ++s) {
        const double p = (s % 2 == 0) ? 2.0 : 1.0;
        const LossParams params{p, 2.0, kDegeneracyTol, 0.1};
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const std::vector<double> gn = loss_gradient(pred, label, params);
        const NormalizedBatch pn = normalize(pred, 2.0);
        double l1 = 0.0;
        for (double v : gn) l1 += std::fabs(v);
        const double denom = std::max(l1, 1e-12);
        r.worst = std::max(r.worst, std::fabs(sum_of(gn)) / denom);
        r.worst = std::max(r.worst, std::fabs(dot(gn, pn.values)) / denom);
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_gradient_scale_response(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"gradients.scale_response", false, 0.0, 1e-12, samples,
                  "gradient of k*pred equals gradient/k for k>0"};
    for (std::size_t s = 0; s < samples; ++s) {
        const auto& pq = kPqPairs[s % 4];
        const LossParams params{pq[0], pq[1], kDegeneracyTol, 0.1};
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const double k = uniform(g, 0.1, 10.0);
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = k * pred[i];
        std::vector<double> expected = loss_gradient(pred, label, params);
        for (double& v : expected) v /= k;
        const std::vector<double> got = loss_gradient(scaled, label, params);
        r.worst = std::max(r.worst, vector_rel_gap(got, expected));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_gradient_perfect_fit(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"gradients.perfect_fit_zero", false, 0.0, 1e-12, samples,
                  "pred affine in label (positive slope) gives zero gradient"};
    const LossParams params{2.0, 2.0, kDegeneracyTol, 0.1};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> label = random_batch(g, n, kScales[s % 3]);
        const double k1 = uniform(g, 0.1, 5.0);
        const double k2 = uniform(g, -20.0, 20.0);
        std::vector<double> pred(n);
        for (std::size_t i = 0; i < n; ++i) pred[i] = k1 * label[i] + k2;
        const std::vector<double> gn = loss_gradient(pred, label, params);
        r.worst = std::max(r.worst, max_abs(gn));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_gradient_fd(std::size_t samples, std::uint64_t seed, double p,
                                     double q, double bound, const char* name) {
    std::mt19937_64 g(seed);
    CheckResult r{name, false, 0.0, bound, samples, ""};
    const LossParams params{p, q, kDegeneracyTol, 0.1};
    std::size_t tested = 0, skipped = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const double scale = (s % 2 == 0) ? 1.0 : 100.0;
        const std::vector<double> pred = random_batch(g, n, scale);
        const std::vector<double> label = random_batch(g, n, scale);
        const GradientCheck check = gradient_check(pred, label, params);
        r.worst = std::max(r.worst, check.max_rel_error);
        tested += check.tested;
        skipped += check.skipped;
    }
    r.note = "coordinates tested " + std::to_string(tested) + ", skipped near kinks " +
             std::to_string(skipped);
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_variant_gradient_fd(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"gradients.variant_fd_check", false, 0.0, 1e-6, samples,
                  "stop-gradient correlation, frozen-rho differences"};
    const LossParams params{2.0, 2.0, kDegeneracyTol, 0.1};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const double scale = (s % 2 == 0) ? 1.0 : 100.0;
        const std::vector<double> pred = random_batch(g, n, scale);
        const std::vector<double> label = random_batch(g, n, scale);
        const std::vector<double> analytic = variant_gradient(pred, label, params);
        const std::vector<double> numeric = finite_diff_variant_gradient(pred, label, params);
        r.worst = std::max(r.worst, vector_rel_gap(analytic, numeric));
    }
    r.passed = r.worst < r.bound;
    return r;
}

// ---- smoothness ------------------------------------------------------------

inline CheckResult check_projection_properties(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"smoothness.projection_properties", false, 0.0, 1e-10, samples,
                  "K symmetric, idempotent, annihilates 1 and S_hat"};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = 2 + bounded(g, 63);
        const std::vector<double> batch = random_batch(g, n, kScales[s % 3]);
        const NormalizedBatch nb = normalize(batch, 2.0);
        const SquareMatrix k = projection_matrix(nb);
        const SquareMatrix kk = matmul(k, k);
        for (std::size_t i = 0; i < n; ++i) {
            double row_sum = 0.0, row_dot_s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                r.worst = std::max(r.worst, std::fabs(k(i, j) - k(j, i)));
                r.worst = std::max(r.worst, std::fabs(kk(i, j) - k(i, j)));
                row_sum += k(i, j);
                row_dot_s += k(i, j) * nb.values[j];
            }
            r.worst = std::max({r.worst, std::fabs(row_sum), std::fabs(row_dot_s)});
        }
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_lipschitz_identity(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"smoothness.lipschitz_identity", false, 0.0, 1e-10, samples,
                  "p in {1,2}, q=2"};
    for (std::size_t s = 0; s < samples; ++s) {
        const double p = (s % 2 == 0) ? 2.0 : 1.0;
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const SmoothnessReport rep = lipschitz_identity(pred, label, p);
        r.worst = std::max(r.worst, rel_gap(rep.lipschitz_lhs, rep.lipschitz_rhs, 1e-12));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_lipschitz_bounds(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"smoothness.lipschitz_bounds", false, 0.0, 1e-10, samples,
                  "||g_n||^2 <= ||g||^2/b^2; and <= ||g||^2 when b >= 1"};
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        const double p = (s % 2 == 0) ? 2.0 : 1.0;
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const SmoothnessReport rep = lipschitz_identity(pred, label, p);
        const double b2 = rep.b_hat * rep.b_hat;
        worst = std::max(worst, rep.lipschitz_lhs - rep.grad_norm_sq / b2);
        if (rep.b_hat >= 1.0) {
            worst = std::max(worst, rep.lipschitz_lhs - rep.grad_norm_sq);
        }
    }
    r.worst = worst;
    r.passed = worst <= r.bound;
    return r;
}

inline CheckResult check_beta_identity(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"smoothness.beta_identity", false, 0.0, 1e-10, samples,
                  "explicit Hessian vs scalar expansion, p=q=2"};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const SmoothnessReport rep = beta_identity(pred, label);
        r.worst = std::max(r.worst, rel_gap(rep.beta_lhs, rep.beta_rhs, 1e-12));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_beta_intermediate(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"smoothness.beta_intermediate", false, 0.0, 1e-9, samples,
                  "p in {2,3}, q=2"};
    for (std::size_t s = 0; s < samples; ++s) {
        const double p = (s % 2 == 0) ? 2.0 : 3.0;
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const auto [lhs, rhs] = beta_intermediate(pred, label, p);
        r.worst = std::max(r.worst, rel_gap(lhs, rhs, 1e-12));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_beta_bracket(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"smoothness.beta_bracket_nonnegative", false, 0.0, -1e-12, samples,
                  "worst = smallest bracket value; must stay above bound"};
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const SmoothnessReport rep = beta_identity(pred, label);
        const double c = normalization_factor(n, 2.0, 2.0);
        const double bracket =
            (4.0 / (c * c)) * (1.0 - rep.rho) + rep.grad_norm_sq - rep.correlation_term;
        worst = std::min(worst, bracket);
    }
    r.worst = worst;
    r.passed = worst >= r.bound;
    return r;
}

inline CheckResult check_hessian_fd(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    const std::size_t draws = std::max<std::size_t>(1, samples / 10);
    CheckResult r{"smoothness.hessian_fd_crosscheck", false, 0.0, 1e-4, draws,
                  "explicit Hessian vs central differences, step 1e-4, N <= 8"};
    const LossParams params{2.0, 2.0, kDegeneracyTol, 0.1};
    constexpr std::size_t sizes[] = {4, 6, 8};
    for (std::size_t s = 0; s < draws; ++s) {
        const std::size_t n = sizes[s % 3];
        const double scale = (s % 2 == 0) ? 1.0 : 4.0;
        const std::vector<double> pred = random_batch(g, n, scale);
        const std::vector<double> label = random_batch(g, n, scale);
        const SquareMatrix analytic = hessian_wrt_scores(pred, label, params);
        const SquareMatrix numeric = finite_diff_hessian(pred, label, params, 1e-4);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                r.worst = std::max(r.worst, std::fabs(analytic(i, j) - numeric(i, j)));
            }
        }
    }
    r.passed = r.worst < r.bound;
    return r;
}

// ---- calibration -----------------------------------------------------------

inline CheckResult check_rmse_bridge(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"calibration.rmse_bridge", false, 0.0, 1e-10, samples,
                  "direct calibrated RMSE vs sqrt(4 b^2 l'/N)"};
    const LossParams params{2.0, 2.0, kDegeneracyTol, 0.1};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const CalibrationLine line = lsr_fit(pred, label);
        const double direct = rmse(apply_calibration(line, pred), label);
        const double b = batch_stats(label, 2.0).centered_norm;
        const double via =
            rmse_from_variant(b, variant_loss(pred, label, params).value, n);
        r.worst = std::max(r.worst, rel_gap(direct, via, 1e-12));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_lsr_optimality(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"calibration.lsr_optimality", false, 0.0, -1e-12, samples,
                  "worst = min SSR increase under +-1e-3 perturbations"};
    double worst = std::numeric_limits<double>::infinity();
    const auto ssr = [](const CalibrationLine& line, std::span<const double> pred,
                        std::span<const double> label) {
        double s = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = line.k1 * pred[i] + line.k2 - label[i];
            s += d * d;
        }
        return s;
    };
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> pred = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> label = random_batch(g, n, kScales[(s + 1) % 3]);
        const CalibrationLine line = lsr_fit(pred, label);
        const double base = ssr(line, pred, label);
        for (int d1 = -1; d1 <= 1; ++d1) {
            for (int d2 = -1; d2 <= 1; ++d2) {
                if (d1 == 0 && d2 == 0) continue;
                const CalibrationLine moved{line.k1 + 1e-3 * d1, line.k2 + 1e-3 * d2};
                worst = std::min(worst, (ssr(moved, pred, label) - base) / (1.0 + base));
            }
        }
    }
    r.worst = worst;
    r.passed = worst >= r.bound;
    return r;
}

inline CheckResult check_plcc_invariance(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"calibration.plcc_invariance", false, 0.0, 1e-12, samples,
                  "affine map changes PLCC only by the slope's sign"};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> x = random_batch(g, n, kScales[s % 3]);
        const std::vector<double> y = random_batch(g, n, kScales[(s + 1) % 3]);
        const double k1 = (s % 2 == 0 ? 1.0 : -1.0) * uniform(g, 0.1, 3.0);
        const double k2 = uniform(g, -100.0, 100.0);
        std::vector<double> mapped(n);
        for (std::size_t i = 0; i < n; ++i) mapped[i] = k1 * x[i] + k2;
        const double sign = k1 < 0.0 ? -1.0 : 1.0;
        r.worst = std::max(r.worst, std::fabs(plcc(mapped, y) - sign * plcc(x, y)));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_srocc_monotone(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"calibration.srocc_monotone_invariance", false, 0.0, 0.0, samples,
                  "exp/cube transforms leave ranks (hence SROCC) untouched"};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = kBatchSizes[s % 3];
        const std::vector<double> x = random_batch(g, n, 100.0);
        const std::vector<double> y = random_batch(g, n, 100.0);
        std::vector<double> ex(n), cy(n);
        for (std::size_t i = 0; i < n; ++i) {
            ex[i] = std::exp(x[i] / 25.0);
            cy[i] = y[i] * y[i] * y[i];
        }
        const double base = srocc(x, y);
        r.worst = std::max({r.worst, std::fabs(srocc(ex, y) - base),
                            std::fabs(srocc(x, cy) - base)});
    }
    r.passed = r.worst <= r.bound;
    return r;
}

inline CheckResult check_srocc_permutation(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    CheckResult r{"calibration.srocc_equals_plcc_on_ranks", false, 0.0, 0.0, samples,
                  "tie-free permutations of 1..N are already rank vectors"};
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = 3 + bounded(g, 14);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] = static_cast<double>(i + 1);
        shuffle(x, g);
        shuffle(y, g);
        r.worst = std::max(r.worst, std::fabs(srocc(x, y) - plcc(x, y)));
    }
    r.passed = r.worst <= r.bound;
    return r;
}

// ---- trainer ---------------------------------------------------------------

inline CheckResult check_composed_gradient(std::size_t samples, std::uint64_t seed) {
    const std::size_t draws = std::max<std::size_t>(1, samples / 10);
    std::mt19937_64 g(seed);
    CheckResult r{"trainer.composed_gradient", false, 0.0, 1e-6, draws,
                  "backprop through mlp1 vs finite differences on parameters"};
    const LossParams params{2.0, 2.0, kDegeneracyTol, 0.1};
    for (std::size_t s = 0; s < draws; ++s) {
        ToyModel model = make_mlp1(3, 4);
        init_params(model, derive_seed(seed, s + 1));
        RowMatrix x(8, 3);
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t j = 0; j < 3; ++j) x(i, j) = standard_normal(g);
        }
        const std::vector<double> y = random_batch(g, 8, 100.0);
        const std::vector<double> pred = model_forward(model, x);
        std::vector<double> analytic, fd(model.params.size());
        try {
            analytic = model_backward(model, x, loss_gradient(pred, y, params));
        } catch (const DegenerateBatch&) {
            continue;
        }
        ToyModel probe = model;
        for (std::size_t j = 0; j < probe.params.size(); ++j) {
            const double theta = model.params[j];
            const double h = 1e-6 * std::max(1.0, std::fabs(theta));
            probe.params[j] = theta + h;
            const double up = norm_in_norm(model_forward(probe, x), y, params).value;
            probe.params[j] = theta - h;
            const double down = norm_in_norm(model_forward(probe, x), y, params).value;
            probe.params[j] = theta;
            fd[j] = (up - down) / (2.0 * h);
        }
        r.worst = std::max(r.worst, vector_rel_gap(analytic, fd));
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline CheckResult check_adam_first_step(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    const std::size_t draws = std::max<std::size_t>(1, samples / 20);
    CheckResult r{"trainer.adam_first_step", false, 0.0, 1e-5, draws,
                  "first-step magnitude equals lr up to the epsilon floor"};
    for (std::size_t s = 0; s < draws; ++s) {
        const std::size_t n = 32;
        std::vector<double> params(n, 0.0), grads(n);
        for (double& v : grads) {
            v = uniform(g, -2.0, 2.0);
            if (std::fabs(v) < 0.01) v = 0.01;
        }
        const double lr = 1e-3;
        Optimizer opt(OptimizerKind::adam, n);
        opt.step(params, grads, lr);
        for (std::size_t i = 0; i < n; ++i) {
            r.worst = std::max(r.worst, std::fabs(std::fabs(params[i]) / lr - 1.0));
        }
    }
    r.passed = r.worst < r.bound;
    return r;
}

inline bool logs_identical(const ConvergenceLog& a, const ConvergenceLog& b) {
    if (a.epochs.size() != b.epochs.size()) return false;
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        const EpochRecord &x = a.epochs[i], &y = b.epochs[i];
        if (x.epoch != y.epoch || x.train_loss != y.train_loss || x.val_plcc != y.val_plcc ||
            x.val_srocc != y.val_srocc || x.val_rmse != y.val_rmse ||
            x.mean_b_hat != y.mean_b_hat) {
            return false;
        }
    }
    if (a.degenerate_batches_skipped != b.degenerate_batches_skipped) return false;
    if (a.best_epoch != b.best_epoch || a.best_val_srocc != b.best_val_srocc) return false;
    if (a.best_model.params != b.best_model.params) return false;
    if (a.divergence.has_value() != b.divergence.has_value()) return false;
    if (a.divergence &&
        (a.divergence->epoch != b.divergence->epoch || a.divergence->batch != b.divergence->batch ||
         a.divergence->reason != b.divergence->reason)) {
        return false;
    }
    if (a.final_calibration.has_value() != b.final_calibration.has_value()) return false;
    if (a.final_calibration && (a.final_calibration->k1 != b.final_calibration->k1 ||
                                a.final_calibration->k2 != b.final_calibration->k2)) {
        return false;
    }
    return true;
}

inline CheckResult check_train_determinism(std::size_t, std::uint64_t seed) {
    CheckResult r{"trainer.determinism", false, 0.0, 0.0, 2,
                  "two identical runs produce bit-identical logs"};
    SyntheticSpec spec;
    spec.n_samples = 120;
    spec.dim = 4;
    spec.noise_sigma = 5.0;
    spec.seed = derive_seed(seed, 0);
    const Dataset ds = generate_dataset(spec);

    std::size_t mismatches = 0;
    for (const LossKind kind : {LossKind::norm_in_norm, LossKind::mae}) {
        TrainConfig cfg;
        cfg.loss_kind = kind;
        cfg.loss_params = LossParams{1.0, 2.0, kDegeneracyTol, 0.1};
        cfg.model_kind = ModelKind::mlp1;
        cfg.hidden = 8;
        cfg.batch_size = 8;
        cfg.epochs = 3;
        cfg.seed = derive_seed(seed, 1);
        if (!logs_identical(train(ds, cfg), train(ds, cfg))) ++mismatches;
    }
    r.worst = static_cast<double>(mismatches);
    r.passed = mismatches == 0;
    return r;
}

inline CheckResult check_linear_recovery(std::size_t, std::uint64_t seed) {
    CheckResult r{"trainer.linear_recovery", false, 0.0, 0.999, 3,
                  "noiseless linear data: calibrated validation PLCC > 0.999; worst = min PLCC"};
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < 3; ++s) {
        SyntheticSpec spec;
        spec.n_samples = 200;
        spec.dim = 3;
        spec.mode = SynthMode::linear;
        spec.noise_sigma = 0.0;
        spec.seed = derive_seed(seed, s);
        const Dataset ds = generate_dataset(spec);

        TrainConfig cfg;
        cfg.loss_kind = LossKind::norm_in_norm;
        cfg.loss_params = LossParams{1.0, 2.0, kDegeneracyTol, 0.1};
        cfg.model_kind = ModelKind::linear;
        cfg.learning_rate = 1e-2;
        cfg.batch_size = 16;
        cfg.epochs = 30;
        cfg.seed = derive_seed(seed, 100 + s);
        const ConvergenceLog log = train(ds, cfg);
        if (log.epochs.empty()) {
            worst = 0.0;
            break;
        }
        worst = std::min(worst, log.epochs.back().val_plcc);
    }
    r.worst = worst;
    r.passed = worst > r.bound;
    return r;
}

// ---- harness ---------------------------------------------------------------

inline CheckResult check_csv_roundtrip(std::size_t, std::uint64_t seed) {
    CheckResult r{"harness.csv_roundtrip", false, 0.0, 0.0, 3,
                  "write then ingest reproduces every value bit-exactly"};
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        SyntheticSpec spec;
        spec.n_samples = 40;
        spec.dim = 3;
        spec.mode = (s % 2 == 0) ? SynthMode::warped : SynthMode::linear;
        spec.seed = derive_seed(seed, s);
        const Dataset ds = generate_dataset(spec);

        const std::filesystem::path path =
            std::filesystem::temp_directory_path() /
            ("norminorm_roundtrip_" + std::to_string(::getpid()) + "_" + std::to_string(s) +
             ".csv");
        write_csv(ds, path);
        const Dataset back = ingest_csv(path);
        std::filesystem::remove(path);

        if (back.size() != ds.size() || back.features.cols() != ds.features.cols()) {
            ++mismatches;
            continue;
        }
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.mos[i] != back.mos[i] || ds.split[i] != back.split[i]) ++mismatches;
            for (std::size_t j = 0; j < ds.features.cols(); ++j) {
                if (ds.features(i, j) != back.features(i, j)) ++mismatches;
            }
        }
    }
    r.worst = static_cast<double>(mismatches);
    r.passed = mismatches == 0;
    return r;
}

inline CheckResult check_generator_properties(std::size_t, std::uint64_t seed) {
    CheckResult r{"harness.generator_properties", false, 0.0, 0.0, 3,
                  "determinism; noiseless linear is exactly affine; warp keeps ranks"};
    bool ok = true;
    double worst = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
        SyntheticSpec spec;
        spec.n_samples = 150;
        spec.dim = 5;
        spec.noise_sigma = 0.0;
        spec.seed = derive_seed(seed, s);

        spec.mode = SynthMode::linear;
        const Dataset lin = generate_dataset(spec);
        const Dataset lin2 = generate_dataset(spec);
        ok = ok && lin.mos == lin2.mos && lin.features.data().size() == lin2.features.data().size();
        const double lin_plcc = plcc(lin.latent, lin.mos);
        worst = std::max(worst, 1.0 - lin_plcc);
        ok = ok && lin_plcc >= 1.0 - 1e-12;

        spec.mode = SynthMode::warped;
        const Dataset wrp = generate_dataset(spec);
        ok = ok && srocc(wrp.latent, wrp.mos) >= 1.0 - 1e-12;
        ok = ok && plcc(wrp.latent, wrp.mos) < 1.0 - 1e-6;
    }
    r.worst = worst;
    r.passed = ok;
    return r;
}

}  // namespace detail

/// Run every module's property suite on `sample_count` random instances
/// (heavyweight checks use a documented fraction; the norm-bound and loss
/// range checks use 10x). Fixed seed => identical report.
inline VerifyReport run_verify(std::size_t sample_count, std::uint64_t seed) {
    if (sample_count < 1) throw InvalidSpec("sample_count must be >= 1");
    VerifyReport rep;
    std::uint64_t k = 0;
    const auto next = [&]() { return derive_seed(seed, k++); };

    rep.checks.push_back(detail::check_normalize_postconditions(sample_count, next()));
    rep.checks.push_back(detail::check_normalize_affine_invariance(sample_count, next()));
    rep.checks.push_back(detail::check_lp_norm_homogeneity(sample_count, next()));
    rep.checks.push_back(detail::check_norm_inequality(sample_count, next()));

    rep.checks.push_back(detail::check_loss_range(sample_count, next()));
    rep.checks.push_back(detail::check_loss_linear_invariance(sample_count, next()));
    rep.checks.push_back(detail::check_loss_label_scale(sample_count, next()));
    rep.checks.push_back(detail::check_loss_symmetry(sample_count, next()));
    rep.checks.push_back(detail::check_plcc_bridge(sample_count, next()));
    rep.checks.push_back(detail::check_variant_dominance(sample_count, next()));

    rep.checks.push_back(detail::check_chain_rule_consistency(sample_count, next()));
    rep.checks.push_back(detail::check_gradient_structure(sample_count, next()));
    rep.checks.push_back(detail::check_gradient_scale_response(sample_count, next()));
    rep.checks.push_back(detail::check_gradient_perfect_fit(sample_count, next()));
    rep.checks.push_back(detail::check_gradient_fd(sample_count, next(), 2.0, 2.0, 1e-6,
                                                   "gradients.fd_check_p2_q2"));
    rep.checks.push_back(detail::check_gradient_fd(sample_count, next(), 1.0, 2.0, 1e-5,
                                                   "gradients.fd_check_p1_q2"));
    rep.checks.push_back(detail::check_gradient_fd(sample_count, next(), 1.0, 1.0, 1e-5,
                                                   "gradients.fd_check_p1_q1"));
    rep.checks.push_back(detail::check_variant_gradient_fd(sample_count, next()));

    rep.checks.push_back(detail::check_projection_properties(sample_count, next()));
    rep.checks.push_back(detail::check_lipschitz_identity(sample_count, next()));
    rep.checks.push_back(detail::check_lipschitz_bounds(sample_count, next()));
    rep.checks.push_back(detail::check_beta_identity(sample_count, next()));
    rep.checks.push_back(detail::check_beta_intermediate(sample_count, next()));
    rep.checks.push_back(detail::check_beta_bracket(sample_count, next()));
    rep.checks.push_back(detail::check_hessian_fd(sample_count, next()));

    rep.checks.push_back(detail::check_rmse_bridge(sample_count, next()));
    rep.checks.push_back(detail::check_lsr_optimality(sample_count, next()));
    rep.checks.push_back(detail::check_plcc_invariance(sample_count, next()));
    rep.checks.push_back(detail::check_srocc_monotone(sample_count, next()));
    rep.checks.push_back(detail::check_srocc_permutation(sample_count, next()));

    rep.checks.push_back(detail::check_composed_gradient(sample_count, next()));
    rep.checks.push_back(detail::check_adam_first_step(sample_count, next()));
    rep.checks.push_back(detail::check_train_determinism(sample_count, next()));
    rep.checks.push_back(detail::check_linear_recovery(sample_count, next()));

    rep.checks.push_back(detail::check_csv_roundtrip(sample_count, next()));
    rep.checks.push_back(detail::check_generator_properties(sample_count, next()));
    return rep;
}

}  // namespace norminorm
