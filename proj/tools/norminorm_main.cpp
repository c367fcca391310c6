#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "norminorm/experiment.hpp"
#include "norminorm/smoothness.hpp"
#include "norminorm/verify.hpp"

namespace {

std::pair<double, double> parse_pq(const std::string& text) {
    const std::size_t pos = text.find(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 >= text.size()) {
        throw norminorm::InvalidSpec("exponent pair must look like P:Q, got: " + text);
    }
    std::size_t used = 0;
    const double p = std::stod(text.substr(0, pos), &used);
    if (used != pos) throw norminorm::InvalidSpec("bad exponent pair: " + text);
    const std::string rest = text.substr(pos + 1);
    const double q = std::stod(rest, &used);
    if (used != rest.size()) throw norminorm::InvalidSpec("bad exponent pair: " + text);
    return {p, q};
}

std::string opt_str(const std::optional<double>& v, const char* missing) {
    if (!v) return missing;
    std::ostringstream ss;
    ss << std::setprecision(6) << *v;
    return ss.str();
}

void print_report(const norminorm::ComparisonReport& rep) {
    std::size_t width = 12;
    for (const auto& v : rep.variants) width = std::max(width, v.label.size() + 2);
    std::cout << std::left << std::setw(static_cast<int>(width)) << "variant"
              << std::setw(14) << "final_plcc" << std::setw(14) << "final_srocc"
              << std::setw(14) << "final_rmse" << std::setw(20) << "epochs_to_thresh"
              << "divergences\n";
    for (const auto& v : rep.variants) {
        std::cout << std::left << std::setw(static_cast<int>(width)) << v.label
                  << std::setw(14) << opt_str(v.median_final_plcc, "n/a")
                  << std::setw(14) << opt_str(v.median_final_srocc, "n/a")
                  << std::setw(14) << opt_str(v.median_final_rmse, "n/a")
                  << std::setw(20) << opt_str(v.median_epochs_to_threshold, "never")
                  << v.divergence_count << "\n";
    }
    if (std::isfinite(rep.plcc_threshold)) {
        std::cout << "threshold: validation PLCC >= " << std::setprecision(6)
                  << rep.plcc_threshold << " (" << rep.threshold_fraction
                  << " x best median final PLCC)\n";
    }
    if (!rep.best_variant.empty()) std::cout << "best: " << rep.best_variant << "\n";
}

void print_log(const norminorm::ConvergenceLog& log) {
    std::cout << std::left << std::setw(7) << "epoch" << std::setw(16) << "train_loss"
              << std::setw(12) << "val_plcc" << std::setw(12) << "val_srocc"
              << std::setw(12) << "val_rmse" << "mean_b_hat\n";
    for (const auto& e : log.epochs) {
        std::cout << std::left << std::setw(7) << e.epoch << std::setprecision(8)
                  << std::setw(16) << e.train_loss << std::setprecision(6) << std::setw(12)
                  << e.val_plcc << std::setw(12) << e.val_srocc << std::setw(12) << e.val_rmse
                  << e.mean_b_hat << "\n";
    }
    if (log.divergence) {
        std::cout << "divergence at epoch " << log.divergence->epoch << ", batch "
                  << log.divergence->batch << ": " << log.divergence->reason << "\n";
    }
    if (log.degenerate_batches_skipped > 0) {
        std::cout << "degenerate batches skipped: " << log.degenerate_batches_skipped << "\n";
    }
    if (log.best_val_srocc) {
        std::cout << "best epoch " << log.best_epoch << " (val SROCC "
                  << std::setprecision(6) << *log.best_val_srocc << ")\n";
    }
}

int classify_exit(const norminorm::Error& e) {
    if (dynamic_cast<const norminorm::IoError*>(&e) != nullptr) return 3;
    if (dynamic_cast<const norminorm::InvalidSpec*>(&e) != nullptr ||
        dynamic_cast<const norminorm::InvalidExponent*>(&e) != nullptr ||
        dynamic_cast<const norminorm::InvalidBatchSize*>(&e) != nullptr ||
        dynamic_cast<const norminorm::LengthMismatch*>(&e) != nullptr ||
        dynamic_cast<const norminorm::DimensionMismatch*>(&e) != nullptr ||
        dynamic_cast<const norminorm::SchemaError*>(&e) != nullptr ||
        dynamic_cast<const norminorm::ParseError*>(&e) != nullptr ||
        dynamic_cast<const norminorm::NonFiniteInput*>(&e) != nullptr ||
        dynamic_cast<const norminorm::DegenerateBatch*>(&e) != nullptr) {
        return 2;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace norminorm;

    CLI::App app{
        "norminorm: batch-normalized regression losses with analytic gradients,\n"
        "smoothness diagnostics, correlation metrics, and a small training harness."};
    app.require_subcommand(1);

    const std::map<std::string, LossKind> loss_map{{"norm_in_norm", LossKind::norm_in_norm},
                                                   {"variant", LossKind::variant},
                                                   {"combined", LossKind::combined},
                                                   {"mae", LossKind::mae},
                                                   {"mse", LossKind::mse}};
    const std::map<std::string, SynthMode> mode_map{{"linear", SynthMode::linear},
                                                    {"warped", SynthMode::warped}};
    const std::map<std::string, OptimizerKind> opt_map{{"sgd", OptimizerKind::sgd},
                                                       {"adam", OptimizerKind::adam}};
    const std::map<std::string, ModelKind> model_map{{"linear", ModelKind::linear},
                                                     {"mlp1", ModelKind::mlp1}};

    const auto add_synth_options = [&](CLI::App* sub, SyntheticSpec& spec) {
        sub->add_option("--n", spec.n_samples, "synthetic sample count (default 2000)");
        sub->add_option("--dim", spec.dim, "synthetic feature dimension (default 8)");
        sub->add_option("--mode", spec.mode, "synthetic mode: linear|warped (default warped)")
            ->transform(CLI::CheckedTransformer(mode_map, CLI::ignore_case));
        sub->add_option("--noise", spec.noise_sigma, "label noise sigma (default 5)");
        sub->add_option("--low", spec.mos_low, "score range low end (default 0)");
        sub->add_option("--high", spec.mos_high, "score range high end (default 100)");
        sub->add_option("--data-seed", spec.seed, "generator seed (default 0)");
    };
    const auto add_train_options = [&](CLI::App* sub, TrainConfig& cfg) {
        sub->add_option("--loss", cfg.loss_kind,
                        "loss kind: norm_in_norm|variant|combined|mae|mse")
            ->transform(CLI::CheckedTransformer(loss_map, CLI::ignore_case));
        sub->add_option("--p", cfg.loss_params.p, "residual exponent p >= 1 (default 1)");
        sub->add_option("--q", cfg.loss_params.q, "normalization exponent q >= 1 (default 2)");
        sub->add_option("--variant-weight", cfg.loss_params.variant_weight,
                        "weight of the rescaled term in the combined loss (default 0.1)");
        sub->add_option("--optimizer", cfg.optimizer, "optimizer: adam|sgd (default adam)")
            ->transform(CLI::CheckedTransformer(opt_map, CLI::ignore_case));
        sub->add_option("--lr", cfg.learning_rate, "initial learning rate (default 1e-3)");
        sub->add_option("--lr-decay-factor", cfg.lr_decay.factor,
                        "learning-rate decay multiplier (default 0.1)");
        sub->add_option("--lr-decay-every", cfg.lr_decay.every_k_epochs,
                        "decay period in epochs; 0 means ceil(epochs/3) (default 0)");
        sub->add_option("--batch-size", cfg.batch_size, "mini-batch size (default 16)");
        sub->add_option("--seed", cfg.seed, "training seed (default 0)");
        sub->add_option("--model", cfg.model_kind, "model: linear|mlp1 (default mlp1)")
            ->transform(CLI::CheckedTransformer(model_map, CLI::ignore_case));
        sub->add_option("--hidden", cfg.hidden, "mlp1 hidden width (default 16)");
    };

    bool verify_failed = false;

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset and write it as CSV");
    SyntheticSpec gen_spec;
    std::string gen_out;
    add_synth_options(gen, gen_spec);
    gen->add_option("--out", gen_out, "output CSV path")->required();
    gen->callback([&] {
        const Dataset ds = generate_dataset(gen_spec);
        write_csv(ds, gen_out);
        std::cout << "wrote " << ds.size() << " samples (dim " << ds.features.cols()
                  << ") to " << gen_out << "\n";
    });

    // ---- train ----
    auto* tr = app.add_subcommand("train", "Train one model and print its convergence log");
    SyntheticSpec train_spec;
    TrainConfig train_cfg;
    std::string train_data, train_out;
    tr->add_option("--data", train_data, "dataset CSV; omitted = synthetic default");
    add_synth_options(tr, train_spec);
    add_train_options(tr, train_cfg);
    tr->add_option("--epochs", train_cfg.epochs, "training epochs (default 30)");
    tr->add_option("--out", train_out, "directory for the run JSON + curve CSV (optional)");
    tr->callback([&] {
        const Dataset ds =
            train_data.empty() ? generate_dataset(train_spec) : ingest_csv(train_data);
        const ConvergenceLog log = train(ds, train_cfg);
        print_log(log);
        if (!log.epochs.empty()) {
            const CalibrationLine line = log.final_calibration.value_or(CalibrationLine{});
            try {
                const SplitMetrics tm = evaluate_split(log.best_model, ds, Split::test, line);
                std::cout << "test (best model, calibrated): plcc " << std::setprecision(6)
                          << tm.plcc << ", srocc " << tm.srocc << ", rmse " << tm.rmse << "\n";
            } catch (const Error& e) {
                std::cout << "test metrics unavailable: " << e.what() << "\n";
            }
        }
        if (!train_out.empty()) {
            RunRecord rec;
            rec.label = detail::variant_label(train_cfg);
            rec.seed = train_cfg.seed;
            rec.config = train_cfg;
            rec.log = log;
            const std::filesystem::path dir(train_out);
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            if (ec) throw IoError("cannot create output directory: " + dir.string());
            const std::string stem = rec.label + "-s" + std::to_string(rec.seed);
            detail::write_text_file(dir / ("run-" + stem + ".json"),
                                    detail::run_to_json(rec).dump(2) + "\n");
            detail::write_text_file(dir / ("curve-" + stem + ".csv"),
                                    detail::curve_csv(rec.log));
            std::cout << "wrote run-" << stem << ".json and curve-" << stem << ".csv under "
                      << train_out << "\n";
        }
    });

    // ---- compare ----
    auto* cmp = app.add_subcommand(
        "compare", "Train several loss kinds across seeds and summarize convergence");
    SyntheticSpec cmp_spec;
    TrainConfig cmp_base;
    cmp_base.epochs = 60;
    std::string cmp_data;
    std::vector<LossKind> cmp_losses{LossKind::norm_in_norm, LossKind::mae, LossKind::mse};
    ExperimentConfig cmp_cfg;
    cmp->add_option("--data", cmp_data, "dataset CSV; omitted = synthetic default");
    add_synth_options(cmp, cmp_spec);
    add_train_options(cmp, cmp_base);
    cmp->add_option("--epochs", cmp_base.epochs, "training epochs (default 60)");
    cmp->add_option("--losses", cmp_losses,
                    "loss kinds to compare (default norm_in_norm mae mse)")
        ->transform(CLI::CheckedTransformer(loss_map, CLI::ignore_case));
    cmp->add_option("--seeds", cmp_cfg.seeds, "training seeds (default 1 2 3 4 5)");
    cmp->add_option("--out", cmp_cfg.out_dir, "output directory (default runs)");
    cmp->add_option("--threshold-fraction", cmp_cfg.threshold_fraction,
                    "fraction of best median final PLCC used as the speed threshold");
    cmp->callback([&] {
        if (!cmp_data.empty()) cmp_cfg.dataset_path = cmp_data;
        cmp_cfg.synthetic = cmp_spec;
        if (cmp_cfg.seeds.empty()) cmp_cfg.seeds = {1, 2, 3, 4, 5};
        for (const LossKind kind : cmp_losses) {
            TrainConfig v = cmp_base;
            v.loss_kind = kind;
            cmp_cfg.variants.push_back(std::move(v));
        }
        const ComparisonReport rep = run_comparison(cmp_cfg);
        print_report(rep);
        std::cout << "reports written under " << cmp_cfg.out_dir << "\n";
    });

    // ---- sweep ----
    auto* swp = app.add_subcommand(
        "sweep", "Grid over losses x (p:q) x learning rates x batch sizes");
    SyntheticSpec swp_spec;
    TrainConfig swp_base;
    swp_base.epochs = 60;
    std::string swp_data;
    std::vector<LossKind> swp_losses{LossKind::norm_in_norm};
    std::vector<std::string> swp_pq{"1:2"};
    std::vector<double> swp_lrs{1e-2, 1e-3, 1e-4};
    std::vector<std::size_t> swp_bs{16};
    ExperimentConfig swp_cfg;
    swp->add_option("--data", swp_data, "dataset CSV; omitted = synthetic default");
    add_synth_options(swp, swp_spec);
    add_train_options(swp, swp_base);
    swp->add_option("--epochs", swp_base.epochs, "training epochs (default 60)");
    swp->add_option("--losses", swp_losses, "loss kinds (default norm_in_norm)")
        ->transform(CLI::CheckedTransformer(loss_map, CLI::ignore_case));
    swp->add_option("--pq", swp_pq, "exponent pairs as P:Q (default 1:2)");
    swp->add_option("--lrs", swp_lrs, "learning rates (default 1e-2 1e-3 1e-4)");
    swp->add_option("--batch-sizes", swp_bs, "batch sizes (default 16)");
    swp->add_option("--seeds", swp_cfg.seeds, "training seeds (default 1 2 3 4 5)");
    swp->add_option("--out", swp_cfg.out_dir, "output directory (default runs)");
    swp->add_option("--threshold-fraction", swp_cfg.threshold_fraction,
                    "fraction of best median final PLCC used as the speed threshold");
    swp->callback([&] {
        if (!swp_data.empty()) swp_cfg.dataset_path = swp_data;
        swp_cfg.synthetic = swp_spec;
        if (swp_cfg.seeds.empty()) swp_cfg.seeds = {1, 2, 3, 4, 5};
        SweepAxes axes;
        axes.losses = swp_losses;
        for (const std::string& s : swp_pq) axes.pq_pairs.push_back(parse_pq(s));
        axes.learning_rates = swp_lrs;
        axes.batch_sizes = swp_bs;
        swp_cfg.variants = build_sweep_variants(swp_base, axes);
        const ComparisonReport rep = run_comparison(swp_cfg);
        print_report(rep);
        std::cout << "reports written under " << swp_cfg.out_dir << "\n";
    });

    // ---- verify ----
    auto* ver = app.add_subcommand("verify", "Run the randomized property suite");
    std::size_t ver_samples = 1000;
    std::uint64_t ver_seed = 1;
    std::string ver_json;
    ver->add_option("--samples", ver_samples, "random instances per check (default 1000)");
    ver->add_option("--seed", ver_seed, "base seed (default 1)");
    ver->add_option("--json", ver_json, "also write the report as JSON to this path");
    ver->callback([&] {
        const VerifyReport rep = run_verify(ver_samples, ver_seed);
        for (const CheckResult& c : rep.checks) {
            std::cout << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(44)
                      << c.name << " worst " << std::setw(13) << std::setprecision(4)
                      << c.worst << " bound " << std::setw(10) << c.bound << " samples "
                      << std::setw(7) << c.samples;
            if (!c.note.empty()) std::cout << " (" << c.note << ")";
            std::cout << "\n";
        }
        std::cout << (rep.all_passed() ? "all checks passed" : "CHECKS FAILED") << "\n";
        if (!ver_json.empty()) {
            nlohmann::ordered_json j;
            j["samples"] = ver_samples;
            j["seed"] = ver_seed;
            j["all_passed"] = rep.all_passed();
            nlohmann::ordered_json checks = nlohmann::ordered_json::array();
            for (const CheckResult& c : rep.checks) {
                checks.push_back({{"name", c.name},
                                  {"passed", c.passed},
                                  {"worst", std::isfinite(c.worst)
                                                ? nlohmann::ordered_json(c.worst)
                                                : nullptr},
                                  {"bound", c.bound},
                                  {"samples", c.samples},
                                  {"note", c.note}});
            }
            j["checks"] = std::move(checks);
            detail::write_text_file(ver_json, j.dump(2) + "\n");
        }
        if (!rep.all_passed()) verify_failed = true;
    });

    // ---- diag ----
    auto* dg = app.add_subcommand(
        "diag", "Per-batch smoothness diagnostics (gradient/Hessian shrink factors)");
    SyntheticSpec dg_spec;
    TrainConfig dg_cfg;
    dg_cfg.epochs = 0;
    std::string dg_data, dg_out;
    dg->add_option("--data", dg_data, "dataset CSV; omitted = synthetic default");
    add_synth_options(dg, dg_spec);
    add_train_options(dg, dg_cfg);
    dg->add_option("--epochs", dg_cfg.epochs,
                   "train this many epochs first; 0 diagnoses the fresh model (default 0)");
    dg->add_option("--out", dg_out, "write per-batch rows as CSV to this path (optional)");
    dg->callback([&] {
        const Dataset ds = dg_data.empty() ? generate_dataset(dg_spec) : ingest_csv(dg_data);
        ToyModel model;
        if (dg_cfg.epochs > 0) {
            const ConvergenceLog log = train(ds, dg_cfg);
            model = log.best_model;
            if (log.divergence) {
                std::cout << "note: training diverged at epoch " << log.divergence->epoch
                          << "; diagnosing the best retained model\n";
            }
        } else {
            model = make_model(dg_cfg.model_kind, ds.features.cols(), dg_cfg.hidden);
            init_params(model, derive_seed(dg_cfg.seed, 0));
        }
        const std::vector<std::size_t> order = ds.indices_of(Split::train);
        const std::size_t bs = static_cast<std::size_t>(dg_cfg.batch_size);
        std::string csv = "batch,n,b_hat,lipschitz_ratio,beta_ratio\n";
        std::vector<double> lips, betas;
        std::size_t emitted = 0;
        for (std::size_t start = 0; start + 2 <= order.size(); start += bs) {
            const std::size_t len = std::min(bs, order.size() - start);
            if (len < 2) break;
            const std::vector<std::size_t> idx(order.begin() + start,
                                               order.begin() + start + len);
            const RowMatrix x = detail::gather_rows(ds.features, idx);
            const std::vector<double> y = detail::gather(ds.mos, idx);
            const std::vector<double> pred = model_forward(model, x);
            SmoothnessComparison sc;
            try {
                sc = smoothness_comparison(pred, y, dg_cfg.loss_params);
            } catch (const DegenerateBatch&) {
                continue;
            }
            csv += std::to_string(emitted) + "," + std::to_string(len) + "," +
                   detail::format_double(sc.b_hat) + ",";
            if (sc.lipschitz_ratio) {
                csv += detail::format_double(*sc.lipschitz_ratio);
                lips.push_back(*sc.lipschitz_ratio);
            }
            csv += ",";
            if (sc.beta_ratio) {
                csv += detail::format_double(*sc.beta_ratio);
                betas.push_back(*sc.beta_ratio);
            }
            csv += "\n";
            ++emitted;
        }
        std::cout << "batches diagnosed: " << emitted << "\n";
        if (!lips.empty()) {
            std::cout << "median gradient shrink ||g_n||^2/||g||^2: " << std::setprecision(6)
                      << detail::median_of(std::move(lips)) << "\n";
        }
        if (!betas.empty()) {
            std::cout << "median curvature shrink: " << std::setprecision(6)
                      << detail::median_of(std::move(betas)) << "\n";
        }
        if (!dg_out.empty()) {
            detail::write_text_file(dg_out, csv);
            std::cout << "wrote " << dg_out << "\n";
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return verify_failed ? 1 : 0;
}
