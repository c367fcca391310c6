#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "norminorm/calibration.hpp"
#include "norminorm/dataset.hpp"
#include "norminorm/gradients.hpp"
#include "norminorm/loss.hpp"
#include "norminorm/model.hpp"
#include "norminorm/optimizer.hpp"

namespace norminorm {

enum class LossKind { norm_in_norm, variant, combined, mae, mse };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::norm_in_norm: return "norm_in_norm";
        case LossKind::variant: return "variant";
        case LossKind::combined: return "combined";
        case LossKind::mae: return "mae";
        default: return "mse";
    }
}

/// Learning-rate step decay. every_k_epochs == 0 means "derive from the epoch
/// budget": drop by `factor` every ceil(epochs/3) epochs, i.e. two drops over
/// a full run.
struct LrDecay {
    double factor = 0.1;
    int every_k_epochs = 0;
};

struct TrainConfig {
    LossKind loss_kind = LossKind::norm_in_norm;
    LossParams loss_params{};
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    LrDecay lr_decay{};
    int batch_size = 16;
    int epochs = 30;
    std::uint64_t seed = 0;
    ModelKind model_kind = ModelKind::mlp1;
    std::size_t hidden = 16;
    /// Per-run consistency assertions (composed-gradient finite differences at
    /// start, label-scale invariance on the first epoch, calibration
    /// cross-check). On by default; failures throw Error.
    bool run_smoke_checks = true;
};

struct EpochRecord {
    int epoch = 0;           // 1-based
    double train_loss = 0.0;  // mean objective over processed batches
    double val_plcc = 0.0;    // on LSR-calibrated predictions
    double val_srocc = 0.0;
    double val_rmse = 0.0;
    double mean_b_hat = 0.0;  // mean centered norm of batch predictions
};

/// Non-finite loss/gradient (or an unevaluable epoch boundary) halts the run;
/// the event is recorded in the log rather than thrown.
struct DivergenceEvent {
    int epoch = 0;   // 1-based epoch in which training stopped
    int batch = -1;  // 0-based batch index; -1 for epoch-boundary evaluation
    std::string reason;
};

struct ConvergenceLog {
    std::vector<EpochRecord> epochs;
    std::optional<DivergenceEvent> divergence;
    std::size_t degenerate_batches_skipped = 0;
    int best_epoch = 0;  // 0 = no epoch improved on the initial parameters
    std::optional<double> best_val_srocc;
    ToyModel best_model;  // parameters of the best-validation-SROCC epoch
    std::optional<CalibrationLine> final_calibration;  // best model, train split
};

namespace detail {

struct BatchObjective {
    double value = 0.0;
    std::vector<double> dl_dpred;
};

inline double objective_value(LossKind kind, std::span<const double> pred,
                              std::span<const double> label, const LossParams& params) {
    switch (kind) {
        case LossKind::norm_in_norm: return norm_in_norm(pred, label, params).value;
        case LossKind::variant: return variant_loss(pred, label, params).value;
        case LossKind::combined: return combined_loss(pred, label, params);
        case LossKind::mae: return mae(pred, label);
        default: return mse(pred, label);
    }
}

inline BatchObjective evaluate_objective(LossKind kind, std::span<const double> pred,
                                         std::span<const double> label,
                                         const LossParams& params) {
    BatchObjective out;
    const std::size_t n = pred.size();
    switch (kind) {
        case LossKind::norm_in_norm:
            out.value = norm_in_norm(pred, label, params).value;
            out.dl_dpred = loss_gradient(pred, label, params);
            break;
        case LossKind::variant:
            out.value = variant_loss(pred, label, params).value;
            out.dl_dpred = variant_gradient(pred, label, params);
            break;
        case LossKind::combined: {
            out.value = combined_loss(pred, label, params);
            out.dl_dpred = loss_gradient(pred, label, params);
            const std::vector<double> vg = variant_gradient(pred, label, params);
            for (std::size_t i = 0; i < n; ++i) {
                out.dl_dpred[i] += params.variant_weight * vg[i];
            }
            break;
        }
        case LossKind::mae: {
            out.value = mae(pred, label);
            out.dl_dpred.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                out.dl_dpred[i] = sign_of(pred[i] - label[i]) / static_cast<double>(n);
            }
            break;
        }
        default: {  // mse
            out.value = mse(pred, label);
            out.dl_dpred.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                out.dl_dpred[i] = 2.0 * (pred[i] - label[i]) / static_cast<double>(n);
            }
            break;
        }
    }
    return out;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline RowMatrix gather_rows(const RowMatrix& src, std::span<const std::size_t> idx) {
    RowMatrix out(idx.size(), src.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t c = 0; c < src.cols(); ++c) out(r, c) = src(idx[r], c);
    }
    return out;
}

inline std::vector<double> gather(const std::vector<double>& v,
                                  std::span<const std::size_t> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = v[idx[r]];
    return out;
}

/// Compare model_backward composed with the analytic loss gradient against
/// finite differences of the full objective over the parameters (p=2, q=2).
inline void smoke_composed_gradient(const ToyModel& model, const RowMatrix& x,
                                    std::span<const double> y) {
    const LossParams p22{2.0, 2.0, kDegeneracyTol, 0.1};
    std::vector<double> analytic, fd(model.params.size());
    try {
        const std::vector<double> pred = model_forward(model, x);
        analytic = model_backward(model, x, loss_gradient(pred, y, p22));
        ToyModel probe = model;
        for (std::size_t j = 0; j < probe.params.size(); ++j) {
            const double theta = model.params[j];
            const double h = 1e-6 * std::max(1.0, std::fabs(theta));
            probe.params[j] = theta + h;
            const double up = norm_in_norm(model_forward(probe, x), y, p22).value;
            probe.params[j] = theta - h;
            const double down = norm_in_norm(model_forward(probe, x), y, p22).value;
            probe.params[j] = theta;
            fd[j] = (up - down) / (2.0 * h);
        }
    } catch (const DegenerateBatch&) {
        return;  // constant predictions at init; nothing to check
    }
    const double denom = std::max({max_abs(analytic), max_abs(fd), 1e-12});
    for (std::size_t j = 0; j < fd.size(); ++j) {
        if (std::fabs(analytic[j] - fd[j]) / denom > 1e-6) {
            throw Error("composed gradient check failed at parameter " + std::to_string(j));
        }
    }
}

}  // namespace detail

inline ToyModel make_model(ModelKind kind, std::size_t dim, std::size_t hidden) {
    return kind == ModelKind::linear ? make_linear(dim) : make_mlp1(dim, hidden);
}

/// Calibrated metrics of a model on one split of a dataset.
struct SplitMetrics {
    double plcc = 0.0;
    double srocc = 0.0;
    double rmse = 0.0;
};

inline SplitMetrics evaluate_split(const ToyModel& model, const Dataset& ds, Split split,
                                   const CalibrationLine& line) {
    const std::vector<std::size_t> idx = ds.indices_of(split);
    if (idx.empty()) throw InvalidSpec("evaluate_split: empty split");
    const RowMatrix x = detail::gather_rows(ds.features, idx);
    const std::vector<double> label = detail::gather(ds.mos, idx);
    const std::vector<double> calibrated =
        apply_calibration(line, model_forward(model, x));
    SplitMetrics m;
    m.plcc = plcc(calibrated, label);
    m.srocc = srocc(calibrated, label);
    m.rmse = rmse(calibrated, label);
    return m;
}

/// Shuffled mini-batch training with per-epoch LSR calibration on the full
/// training split and calibrated validation metrics. Deterministic given
/// (dataset, config): all random streams derive from config.seed.
inline ConvergenceLog train(const Dataset& ds, const TrainConfig& cfg) {
    if (cfg.batch_size < 2) throw InvalidSpec("batch_size must be >= 2");
    if (cfg.epochs < 0) throw InvalidSpec("epochs must be >= 0");
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw InvalidSpec("learning_rate must be finite and > 0");
    }
    if (!(cfg.lr_decay.factor > 0.0) || cfg.lr_decay.every_k_epochs < 0) {
        throw InvalidSpec("lr decay needs factor > 0 and every_k_epochs >= 0");
    }
    const std::vector<std::size_t> train_idx = ds.indices_of(Split::train);
    const std::vector<std::size_t> val_idx = ds.indices_of(Split::val);
    if (train_idx.empty() || val_idx.empty()) {
        throw InvalidSpec("train and val splits must be non-empty");
    }
    if (static_cast<std::size_t>(cfg.batch_size) > train_idx.size()) {
        throw InvalidSpec("batch_size exceeds training-set size");
    }

    ToyModel model = make_model(cfg.model_kind, ds.features.cols(), cfg.hidden);
    init_params(model, derive_seed(cfg.seed, 0));
    Optimizer opt(cfg.optimizer, model.params.size());
    std::mt19937_64 shuffle_gen(derive_seed(cfg.seed, 1));

    const RowMatrix train_x = detail::gather_rows(ds.features, train_idx);
    const std::vector<double> train_y = detail::gather(ds.mos, train_idx);
    const RowMatrix val_x = detail::gather_rows(ds.features, val_idx);
    const std::vector<double> val_y = detail::gather(ds.mos, val_idx);

    ConvergenceLog log;
    log.best_model = model;

    if (cfg.run_smoke_checks && cfg.epochs > 0) {
        const std::size_t n0 = static_cast<std::size_t>(cfg.batch_size);
        const RowMatrix x0 = detail::gather_rows(
            ds.features, std::span<const std::size_t>(train_idx).first(n0));
        const std::vector<double> y0 =
            detail::gather(ds.mos, std::span<const std::size_t>(train_idx).first(n0));
        detail::smoke_composed_gradient(model, x0, y0);
    }

    const bool normalized_kind = cfg.loss_kind == LossKind::norm_in_norm ||
                                 cfg.loss_kind == LossKind::variant ||
                                 cfg.loss_kind == LossKind::combined;
    const int every = cfg.lr_decay.every_k_epochs > 0 ? cfg.lr_decay.every_k_epochs
                                                      : std::max(1, (cfg.epochs + 2) / 3);

    std::vector<std::size_t> order = train_idx;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr =
            cfg.learning_rate * std::pow(cfg.lr_decay.factor, (epoch - 1) / every);
        shuffle(order, shuffle_gen);

        double loss_sum = 0.0, bhat_sum = 0.0;
        std::size_t processed = 0;
        bool halted = false;
        for (std::size_t start = 0, batch_i = 0; start < order.size(); start += bs, ++batch_i) {
            const std::size_t len = std::min(bs, order.size() - start);
            if (len < 2) break;  // a singleton tail cannot form a batch objective
            const std::span<const std::size_t> idx(order.data() + start, len);
            const RowMatrix x = detail::gather_rows(ds.features, idx);
            const std::vector<double> y = detail::gather(ds.mos, idx);

            std::vector<double> pred;
            detail::BatchObjective obj;
            try {
                pred = model_forward(model, x);
                obj = detail::evaluate_objective(cfg.loss_kind, pred, y, cfg.loss_params);
            } catch (const DegenerateBatch&) {
                ++log.degenerate_batches_skipped;
                continue;
            } catch (const NonFiniteInput&) {
                log.divergence = DivergenceEvent{epoch, static_cast<int>(batch_i),
                                                 "non-finite predictions"};
                halted = true;
                break;
            }
            if (!std::isfinite(obj.value) || !detail::all_finite(obj.dl_dpred)) {
                log.divergence = DivergenceEvent{epoch, static_cast<int>(batch_i),
                                                 "non-finite loss or gradient"};
                halted = true;
                break;
            }

            if (epoch == 1 && normalized_kind && cfg.run_smoke_checks) {
                // The objective must not care about the label scale.
                std::vector<double> y_scaled(y);
                for (double& v : y_scaled) v *= 100.0;
                const double rescaled =
                    detail::objective_value(cfg.loss_kind, pred, y_scaled, cfg.loss_params);
                if (std::fabs(rescaled - obj.value) > 1e-12 * std::max(1.0, std::fabs(obj.value))) {
                    throw Error("label-scale invariance violated on first-epoch batch");
                }
            }

            loss_sum += obj.value;
            bhat_sum += batch_stats(pred, cfg.loss_params.q).centered_norm;
            ++processed;

            const std::vector<double> grads = model_backward(model, x, obj.dl_dpred);
            opt.step(model.params, grads, lr);
        }
        if (halted) break;
        if (processed == 0) {
            log.divergence =
                DivergenceEvent{epoch, -1, "every batch in the epoch was degenerate"};
            break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(processed);
        rec.mean_b_hat = bhat_sum / static_cast<double>(processed);
        try {
            const std::vector<double> train_pred = model_forward(model, train_x);
            const CalibrationLine line = lsr_fit(train_pred, train_y);
            const std::vector<double> val_pred = model_forward(model, val_x);
            const std::vector<double> calibrated = apply_calibration(line, val_pred);
            rec.val_plcc = plcc(calibrated, val_y);
            rec.val_srocc = srocc(calibrated, val_y);
            rec.val_rmse = rmse(calibrated, val_y);
            if (cfg.run_smoke_checks) {
                // Linear calibration can only flip PLCC's sign, never its size.
                const double raw = plcc(val_pred, val_y);
                const double expected = line.k1 < 0.0 ? -raw : raw;
                if (std::fabs(rec.val_plcc - expected) > 1e-10) {
                    throw Error("calibrated PLCC deviates from raw PLCC");
                }
            }
        } catch (const DegenerateBatch&) {
            log.divergence =
                DivergenceEvent{epoch, -1, "degenerate predictions at evaluation"};
            break;
        } catch (const NonFiniteInput&) {
            log.divergence =
                DivergenceEvent{epoch, -1, "non-finite predictions at evaluation"};
            break;
        }
        log.epochs.push_back(rec);

        if (!log.best_val_srocc || rec.val_srocc > *log.best_val_srocc) {
            log.best_val_srocc = rec.val_srocc;
            log.best_epoch = epoch;
            log.best_model = model;
        }
    }

    try {
        const std::vector<double> train_pred = model_forward(log.best_model, train_x);
        log.final_calibration = lsr_fit(train_pred, train_y);
    } catch (const Error&) {
        log.final_calibration = std::nullopt;
    }
    return log;
}

enum class Metric { plcc, srocc, rmse };

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::plcc: return "plcc";
        case Metric::srocc: return "srocc";
        default: return "rmse";
    }
}

/// First (1-based) epoch whose validation metric passes the threshold:
/// >= for correlations, <= for RMSE. nullopt = never reached.
inline std::optional<int> epochs_to_threshold(const ConvergenceLog& log, Metric metric,
                                              double threshold) {
    for (const EpochRecord& r : log.epochs) {
        const double v = metric == Metric::plcc    ? r.val_plcc
                         : metric == Metric::srocc ? r.val_srocc
                                                   : r.val_rmse;
        const bool hit = metric == Metric::rmse ? v <= threshold : v >= threshold;
        if (hit) return r.epoch;
    }
    return std::nullopt;
}

}  // namespace norminorm
