#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "norminorm/dataset.hpp"
#include "norminorm/trainer.hpp"

namespace norminorm {

/// A comparison experiment: one dataset (loaded from CSV or generated), a list
/// of training variants, and a list of seeds. Every (variant, seed) pair is
/// trained; per-run logs plus one summary are written under `out_dir`.
struct ExperimentConfig {
    std::optional<std::string> dataset_path;
    SyntheticSpec synthetic;
    std::vector<TrainConfig> variants;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = "runs";
    /// The convergence-speed threshold is this fraction of the best variant's
    /// median final validation PLCC.
    double threshold_fraction = 0.95;
    bool write_files = true;
};

struct RunRecord {
    std::string label;
    std::uint64_t seed = 0;
    TrainConfig config;
    ConvergenceLog log;
    std::optional<SplitMetrics> test_metrics;
    std::optional<int> epochs_to_plcc_threshold;
};

struct VariantSummary {
    std::string label;
    TrainConfig config;
    std::vector<std::size_t> run_indices;
    std::optional<double> median_epochs_to_threshold;
    std::optional<double> median_final_plcc;
    std::optional<double> median_final_srocc;
    std::optional<double> median_final_rmse;
    std::size_t divergence_count = 0;
};

struct ComparisonReport {
    double threshold_fraction = 0.95;
    double plcc_threshold = 0.0;
    std::string best_variant;
    std::vector<VariantSummary> variants;
    std::vector<RunRecord> runs;
};

namespace detail {

inline std::string format_compact(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", x);
    return buf;
}

inline bool uses_loss_params(LossKind kind) {
    return kind == LossKind::norm_in_norm || kind == LossKind::variant ||
           kind == LossKind::combined;
}

inline std::string variant_label(const TrainConfig& cfg) {
    std::string s = to_string(cfg.loss_kind);
    if (uses_loss_params(cfg.loss_kind)) {
        s += "_p" + format_compact(cfg.loss_params.p) + "_q" + format_compact(cfg.loss_params.q);
    }
    s += "_lr" + format_compact(cfg.learning_rate) + "_bs" + std::to_string(cfg.batch_size);
    return s;
}

/// Median with "never" encoded as +infinity; result is +-infinity-aware.
inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("NORMINORM_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end != nullptr && *end == '\0' && parsed >= 1) n = parsed;
    }
    if (n == 0) n = 1;
    return std::max<std::size_t>(1, std::min(n, jobs));
}

inline nlohmann::ordered_json json_or_null(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

inline nlohmann::ordered_json config_to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["loss"] = to_string(cfg.loss_kind);
    j["p"] = cfg.loss_params.p;
    j["q"] = cfg.loss_params.q;
    j["variant_weight"] = cfg.loss_params.variant_weight;
    j["optimizer"] = cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd";
    j["learning_rate"] = cfg.learning_rate;
    j["lr_decay_factor"] = cfg.lr_decay.factor;
    j["lr_decay_every_k_epochs"] = cfg.lr_decay.every_k_epochs;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["seed"] = cfg.seed;
    j["model"] = cfg.model_kind == ModelKind::linear ? "linear" : "mlp1";
    j["hidden"] = cfg.hidden;
    return j;
}

inline nlohmann::ordered_json run_to_json(const RunRecord& rec) {
    nlohmann::ordered_json j;
    j["label"] = rec.label;
    j["seed"] = rec.seed;
    j["config"] = config_to_json(rec.config);
    if (rec.log.divergence) {
        j["divergence"] = {{"epoch", rec.log.divergence->epoch},
                           {"batch", rec.log.divergence->batch},
                           {"reason", rec.log.divergence->reason}};
    } else {
        j["divergence"] = nullptr;
    }
    j["degenerate_batches_skipped"] = rec.log.degenerate_batches_skipped;
    j["best_epoch"] = rec.log.best_epoch;
    j["best_val_srocc"] = json_or_null(rec.log.best_val_srocc);
    if (rec.log.final_calibration) {
        j["final_calibration"] = {{"k1", rec.log.final_calibration->k1},
                                  {"k2", rec.log.final_calibration->k2}};
    } else {
        j["final_calibration"] = nullptr;
    }
    if (rec.test_metrics) {
        j["test"] = {{"plcc", json_or_null(rec.test_metrics->plcc)},
                     {"srocc", json_or_null(rec.test_metrics->srocc)},
                     {"rmse", json_or_null(rec.test_metrics->rmse)}};
    } else {
        j["test"] = nullptr;
    }
    if (rec.epochs_to_plcc_threshold) {
        j["epochs_to_plcc_threshold"] = *rec.epochs_to_plcc_threshold;
    } else {
        j["epochs_to_plcc_threshold"] = nullptr;
    }
    nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
    for (const EpochRecord& e : rec.log.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", json_or_null(e.train_loss)},
                          {"val_plcc", json_or_null(e.val_plcc)},
                          {"val_srocc", json_or_null(e.val_srocc)},
                          {"val_rmse", json_or_null(e.val_rmse)},
                          {"mean_b_hat", json_or_null(e.mean_b_hat)}});
    }
    j["epochs"] = std::move(epochs);
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::string curve_csv(const ConvergenceLog& log) {
    std::string text = "epoch,loss,plcc,srocc,rmse,b_hat\n";
    for (const EpochRecord& e : log.epochs) {
        text += std::to_string(e.epoch);
        text += ',';
        text += format_double(e.train_loss);
        text += ',';
        text += format_double(e.val_plcc);
        text += ',';
        text += format_double(e.val_srocc);
        text += ',';
        text += format_double(e.val_rmse);
        text += ',';
        text += format_double(e.mean_b_hat);
        text += '\n';
    }
    return text;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const ComparisonReport& rep,
                                             const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    if (cfg.dataset_path) {
        j["dataset"] = {{"path", *cfg.dataset_path}};
    } else {
        const SyntheticSpec& s = cfg.synthetic;
        j["dataset"] = {{"n_samples", s.n_samples},
                        {"dim", s.dim},
                        {"mode", s.mode == SynthMode::linear ? "linear" : "warped"},
                        {"noise_sigma", s.noise_sigma},
                        {"mos_low", s.mos_low},
                        {"mos_high", s.mos_high},
                        {"seed", s.seed}};
    }
    j["threshold_fraction"] = rep.threshold_fraction;
    j["plcc_threshold"] =
        std::isfinite(rep.plcc_threshold) ? nlohmann::ordered_json(rep.plcc_threshold) : nullptr;
    j["best_variant"] = rep.best_variant;
    nlohmann::ordered_json variants = nlohmann::ordered_json::array();
    for (const VariantSummary& v : rep.variants) {
        nlohmann::ordered_json vj;
        vj["label"] = v.label;
        vj["config"] = detail::config_to_json(v.config);
        vj["median_epochs_to_threshold"] = detail::json_or_null(v.median_epochs_to_threshold);
        vj["median_final_plcc"] = detail::json_or_null(v.median_final_plcc);
        vj["median_final_srocc"] = detail::json_or_null(v.median_final_srocc);
        vj["median_final_rmse"] = detail::json_or_null(v.median_final_rmse);
        vj["divergence_count"] = v.divergence_count;
        nlohmann::ordered_json runs = nlohmann::ordered_json::array();
        for (const std::size_t idx : v.run_indices) {
            const RunRecord& rec = rep.runs[idx];
            nlohmann::ordered_json rj;
            rj["seed"] = rec.seed;
            rj["epochs_recorded"] = rec.log.epochs.size();
            rj["diverged"] = rec.log.divergence.has_value();
            rj["divergence_reason"] =
                rec.log.divergence ? nlohmann::ordered_json(rec.log.divergence->reason) : nullptr;
            if (!rec.log.epochs.empty()) {
                const EpochRecord& last = rec.log.epochs.back();
                rj["final_plcc"] = detail::json_or_null(last.val_plcc);
                rj["final_srocc"] = detail::json_or_null(last.val_srocc);
                rj["final_rmse"] = detail::json_or_null(last.val_rmse);
            } else {
                rj["final_plcc"] = nullptr;
                rj["final_srocc"] = nullptr;
                rj["final_rmse"] = nullptr;
            }
            rj["epochs_to_plcc_threshold"] =
                rec.epochs_to_plcc_threshold
                    ? nlohmann::ordered_json(*rec.epochs_to_plcc_threshold)
                    : nullptr;
            if (rec.test_metrics) {
                rj["test_plcc"] = detail::json_or_null(rec.test_metrics->plcc);
                rj["test_srocc"] = detail::json_or_null(rec.test_metrics->srocc);
                rj["test_rmse"] = detail::json_or_null(rec.test_metrics->rmse);
            } else {
                rj["test_plcc"] = nullptr;
                rj["test_srocc"] = nullptr;
                rj["test_rmse"] = nullptr;
            }
            runs.push_back(std::move(rj));
        }
        vj["runs"] = std::move(runs);
        variants.push_back(std::move(vj));
    }
    j["variants"] = std::move(variants);
    return j;
}

/// Load the experiment's dataset: from CSV when a path is given, otherwise
/// from the synthetic generator spec.
inline Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset_path) return ingest_csv(*cfg.dataset_path);
    return generate_dataset(cfg.synthetic);
}

/// Train every (variant, seed) pair, then reduce to per-variant medians and a
/// convergence-speed comparison. Runs execute on a worker pool (capped by the
/// NORMINORM_THREADS environment variable); the reduction and all file output
/// are single-threaded and ordered, so reports are byte-identical across
/// repeated invocations with the same config.
inline ComparisonReport run_comparison(const ExperimentConfig& cfg) {
    if (cfg.variants.empty()) throw InvalidSpec("experiment needs at least one variant");
    if (cfg.seeds.empty()) throw InvalidSpec("experiment needs at least one seed");

    const Dataset ds = load_experiment_dataset(cfg);

    // Unique, human-readable labels; duplicates get a numeric suffix.
    std::vector<std::string> labels;
    for (const TrainConfig& v : cfg.variants) {
        std::string label = detail::variant_label(v);
        std::size_t bump = 1;
        while (std::find(labels.begin(), labels.end(), label) != labels.end()) {
            label = detail::variant_label(v) + "_" + std::to_string(++bump);
        }
        labels.push_back(std::move(label));
    }

    ComparisonReport rep;
    rep.threshold_fraction = cfg.threshold_fraction;
    rep.runs.resize(cfg.variants.size() * cfg.seeds.size());

    std::atomic<std::size_t> next_job{0};
    const std::size_t total = rep.runs.size();
    const auto run_jobs = [&]() {
        for (;;) {
            const std::size_t job = next_job.fetch_add(1);
            if (job >= total) return;
            const std::size_t vi = job / cfg.seeds.size();
            const std::size_t si = job % cfg.seeds.size();
            RunRecord& rec = rep.runs[job];
            rec.label = labels[vi];
            rec.seed = cfg.seeds[si];
            rec.config = cfg.variants[vi];
            rec.config.seed = cfg.seeds[si];
            rec.log = train(ds, rec.config);
            if (!rec.log.epochs.empty()) {
                const CalibrationLine line =
                    rec.log.final_calibration.value_or(CalibrationLine{});
                try {
                    rec.test_metrics =
                        evaluate_split(rec.log.best_model, ds, Split::test, line);
                } catch (const Error&) {
                    rec.test_metrics.reset();
                }
            }
        }
    };

    const std::size_t workers = detail::worker_count(total);
    if (workers <= 1) {
        run_jobs();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_jobs);
        for (std::thread& t : pool) t.join();
    }

    // Reduction pass 1: per-variant median of final validation PLCC; the best
    // of these sets the convergence threshold.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    double best_median_final_plcc = -kInf;
    for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) {
        std::vector<double> finals;
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            const RunRecord& rec = rep.runs[vi * cfg.seeds.size() + si];
            if (!rec.log.epochs.empty()) finals.push_back(rec.log.epochs.back().val_plcc);
        }
        if (!finals.empty()) {
            best_median_final_plcc =
                std::max(best_median_final_plcc, detail::median_of(std::move(finals)));
        }
    }
    rep.plcc_threshold = std::isfinite(best_median_final_plcc)
                             ? cfg.threshold_fraction * best_median_final_plcc
                             : kInf;

    // Reduction pass 2: per-run epochs-to-threshold, then per-variant medians.
    for (RunRecord& rec : rep.runs) {
        if (std::isfinite(rep.plcc_threshold)) {
            rec.epochs_to_plcc_threshold =
                epochs_to_threshold(rec.log, Metric::plcc, rep.plcc_threshold);
        }
    }
    for (std::size_t vi = 0; vi < cfg.variants.size(); ++vi) {
        VariantSummary vs;
        vs.label = labels[vi];
        vs.config = cfg.variants[vi];
        std::vector<double> etts, plccs, sroccs, rmses;
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            const std::size_t idx = vi * cfg.seeds.size() + si;
            vs.run_indices.push_back(idx);
            const RunRecord& rec = rep.runs[idx];
            if (rec.log.divergence) ++vs.divergence_count;
            if (rec.log.epochs.empty()) continue;
            const EpochRecord& last = rec.log.epochs.back();
            plccs.push_back(last.val_plcc);
            sroccs.push_back(last.val_srocc);
            rmses.push_back(last.val_rmse);
            etts.push_back(rec.epochs_to_plcc_threshold
                               ? static_cast<double>(*rec.epochs_to_plcc_threshold)
                               : kInf);
        }
        if (!plccs.empty()) {
            vs.median_final_plcc = detail::median_of(std::move(plccs));
            vs.median_final_srocc = detail::median_of(std::move(sroccs));
            vs.median_final_rmse = detail::median_of(std::move(rmses));
        }
        if (!etts.empty()) {
            const double med = detail::median_of(std::move(etts));
            if (std::isfinite(med)) vs.median_epochs_to_threshold = med;
        }
        rep.variants.push_back(std::move(vs));
    }

    // Best variant: fastest to threshold, then highest median final PLCC.
    double best_ett = kInf, best_plcc = -kInf;
    for (const VariantSummary& vs : rep.variants) {
        const double ett = vs.median_epochs_to_threshold.value_or(kInf);
        const double fp = vs.median_final_plcc.value_or(-kInf);
        if (ett < best_ett || (ett == best_ett && fp > best_plcc)) {
            best_ett = ett;
            best_plcc = fp;
            rep.best_variant = vs.label;
        }
    }

    if (cfg.write_files) {
        const std::filesystem::path dir(cfg.out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory: " + dir.string());
        for (const RunRecord& rec : rep.runs) {
            const std::string stem = rec.label + "-s" + std::to_string(rec.seed);
            detail::write_text_file(dir / ("run-" + stem + ".json"),
                                    detail::run_to_json(rec).dump(2) + "\n");
            detail::write_text_file(dir / ("curve-" + stem + ".csv"),
                                    detail::curve_csv(rec.log));
        }
        detail::write_text_file(dir / "summary.json",
                                report_to_json(rep, cfg).dump(2) + "\n");
    }
    return rep;
}

/// Axes for a grid sweep; the cross product is expanded into TrainConfig
/// variants. Loss kinds that ignore (p, q) contribute one variant per
/// (lr, batch) cell instead of one per (p, q) pair.
struct SweepAxes {
    std::vector<LossKind> losses;
    std::vector<std::pair<double, double>> pq_pairs;
    std::vector<double> learning_rates;
    std::vector<std::size_t> batch_sizes;
};

inline std::vector<TrainConfig> build_sweep_variants(const TrainConfig& base,
                                                     const SweepAxes& axes) {
    if (axes.losses.empty() || axes.pq_pairs.empty() || axes.learning_rates.empty() ||
        axes.batch_sizes.empty()) {
        throw InvalidSpec("sweep axes must all be non-empty");
    }
    std::vector<TrainConfig> out;
    for (const LossKind kind : axes.losses) {
        const std::size_t pq_count = detail::uses_loss_params(kind) ? axes.pq_pairs.size() : 1;
        for (std::size_t pi = 0; pi < pq_count; ++pi) {
            for (const double lr : axes.learning_rates) {
                for (const std::size_t bs : axes.batch_sizes) {
                    TrainConfig cfg = base;
                    cfg.loss_kind = kind;
                    if (detail::uses_loss_params(kind)) {
                        cfg.loss_params.p = axes.pq_pairs[pi].first;
                        cfg.loss_params.q = axes.pq_pairs[pi].second;
                    }
                    cfg.learning_rate = lr;
                    cfg.batch_size = bs;
                    out.push_back(std::move(cfg));
                }
            }
        }
    }
    return out;
}

}  // namespace norminorm
