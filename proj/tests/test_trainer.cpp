#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include "norminorm/trainer.hpp"

using Catch::Approx;
using namespace norminorm;

namespace {

ConvergenceLog fabricated_log(const std::vector<double>& plcc_curve,
                              const std::vector<double>& rmse_curve) {
    ConvergenceLog log;
    for (std::size_t i = 0; i < plcc_curve.size(); ++i) {
        EpochRecord r;
        r.epoch = static_cast<int>(i) + 1;
        r.val_plcc = plcc_curve[i];
        r.val_srocc = plcc_curve[i];
        r.val_rmse = i < rmse_curve.size() ? rmse_curve[i] : 0.0;
        log.epochs.push_back(r);
    }
    return log;
}

TrainConfig small_config(LossKind kind) {
    TrainConfig cfg;
    cfg.loss_kind = kind;
    cfg.loss_params = LossParams{1.0, 2.0, kDegeneracyTol, 0.1};
    cfg.optimizer = OptimizerKind::adam;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.seed = 5;
    cfg.model_kind = ModelKind::mlp1;
    cfg.hidden = 8;
    return cfg;
}

}  // namespace

TEST_CASE("epochs_to_threshold finds the first qualifying epoch", "[trainer]") {
    const ConvergenceLog log = fabricated_log({0.5, 0.91, 0.95}, {5.0, 2.0, 1.0});

    const std::optional<int> by_plcc = epochs_to_threshold(log, Metric::plcc, 0.9);
    REQUIRE(by_plcc.has_value());
    REQUIRE(*by_plcc == 2);

    // RMSE counts down, so the comparison flips direction.
    const std::optional<int> by_rmse = epochs_to_threshold(log, Metric::rmse, 1.5);
    REQUIRE(by_rmse.has_value());
    REQUIRE(*by_rmse == 3);

    const std::optional<int> by_srocc = epochs_to_threshold(log, Metric::srocc, 0.91);
    REQUIRE(by_srocc.has_value());
    REQUIRE(*by_srocc == 2);

    REQUIRE_FALSE(epochs_to_threshold(log, Metric::plcc, 0.99).has_value());
    REQUIRE_FALSE(epochs_to_threshold(ConvergenceLog{}, Metric::plcc, 0.0).has_value());
}

TEST_CASE("loss and metric names", "[trainer]") {
    REQUIRE(std::string(to_string(LossKind::norm_in_norm)) == "norm_in_norm");
    REQUIRE(std::string(to_string(LossKind::variant)) == "variant");
    REQUIRE(std::string(to_string(LossKind::combined)) == "combined");
    REQUIRE(std::string(to_string(LossKind::mae)) == "mae");
    REQUIRE(std::string(to_string(LossKind::mse)) == "mse");
    REQUIRE(std::string(to_string(Metric::plcc)) == "plcc");
    REQUIRE(std::string(to_string(Metric::srocc)) == "srocc");
    REQUIRE(std::string(to_string(Metric::rmse)) == "rmse");
}

TEST_CASE("training is bitwise deterministic for a fixed config", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 120;
    spec.dim = 4;
    spec.seed = 7;
    const Dataset ds = generate_dataset(spec);

    const TrainConfig cfg = small_config(LossKind::norm_in_norm);
    const ConvergenceLog a = train(ds, cfg);
    const ConvergenceLog b = train(ds, cfg);

    REQUIRE(a.epochs.size() == b.epochs.size());
    REQUIRE(a.epochs.size() == 3);
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        REQUIRE(a.epochs[i].epoch == b.epochs[i].epoch);
        REQUIRE(a.epochs[i].train_loss == b.epochs[i].train_loss);
        REQUIRE(a.epochs[i].val_plcc == b.epochs[i].val_plcc);
        REQUIRE(a.epochs[i].val_srocc == b.epochs[i].val_srocc);
        REQUIRE(a.epochs[i].val_rmse == b.epochs[i].val_rmse);
        REQUIRE(a.epochs[i].mean_b_hat == b.epochs[i].mean_b_hat);
    }
    REQUIRE(a.best_epoch == b.best_epoch);
    REQUIRE(a.best_model.params == b.best_model.params);
    REQUIRE_FALSE(a.divergence.has_value());
}

TEST_CASE("zero epochs still yields a calibrated initial model", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 60;
    spec.dim = 3;
    spec.seed = 2;
    const Dataset ds = generate_dataset(spec);

    TrainConfig cfg = small_config(LossKind::norm_in_norm);
    cfg.epochs = 0;
    const ConvergenceLog log = train(ds, cfg);
    REQUIRE(log.epochs.empty());
    REQUIRE(log.best_epoch == 0);
    REQUIRE_FALSE(log.best_val_srocc.has_value());
    REQUIRE(log.final_calibration.has_value());
    REQUIRE(log.best_model.params.size() == param_count(ModelKind::mlp1, 3, 8));
}

TEST_CASE("a linear model recovers a noiseless linear dataset", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 200;
    spec.dim = 3;
    spec.mode = SynthMode::linear;
    spec.noise_sigma = 0.0;
    spec.seed = 3;
    const Dataset ds = generate_dataset(spec);

    TrainConfig cfg;
    cfg.loss_kind = LossKind::norm_in_norm;
    cfg.loss_params = LossParams{1.0, 2.0, kDegeneracyTol, 0.1};
    cfg.optimizer = OptimizerKind::adam;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 16;
    cfg.epochs = 30;
    cfg.seed = 11;
    cfg.model_kind = ModelKind::linear;

    const ConvergenceLog log = train(ds, cfg);
    REQUIRE_FALSE(log.divergence.has_value());
    REQUIRE(log.epochs.size() == 30);
    REQUIRE(log.epochs.back().val_plcc > 0.999);

    // The retained model is the first epoch attaining the best validation SROCC.
    REQUIRE(log.best_val_srocc.has_value());
    double best = -2.0;
    int first_best = 0;
    for (const EpochRecord& r : log.epochs) {
        if (r.val_srocc > best) {
            best = r.val_srocc;
            first_best = r.epoch;
        }
    }
    REQUIRE(*log.best_val_srocc == best);
    REQUIRE(log.best_epoch == first_best);
}

TEST_CASE("config validation", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 20;
    spec.dim = 2;
    spec.seed = 1;
    const Dataset ds = generate_dataset(spec);

    TrainConfig cfg = small_config(LossKind::norm_in_norm);
    cfg.epochs = 1;
    cfg.batch_size = 8;

    TrainConfig bad = cfg;
    bad.batch_size = 1;
    REQUIRE_THROWS_AS(train(ds, bad), InvalidSpec);

    bad = cfg;
    bad.learning_rate = 0.0;
    REQUIRE_THROWS_AS(train(ds, bad), InvalidSpec);

    bad = cfg;
    bad.epochs = -1;
    REQUIRE_THROWS_AS(train(ds, bad), InvalidSpec);

    bad = cfg;
    bad.batch_size = 16;  // the train split only has 14 rows
    REQUIRE_THROWS_AS(train(ds, bad), InvalidSpec);

    bad = cfg;
    bad.lr_decay.factor = 0.0;
    REQUIRE_THROWS_AS(train(ds, bad), InvalidSpec);

    Dataset no_val = ds;
    for (Split& s : no_val.split) s = Split::train;
    REQUIRE_THROWS_AS(train(no_val, cfg), InvalidSpec);
}

TEST_CASE("constant labels make every normalized batch degenerate", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 60;
    spec.dim = 3;
    spec.seed = 9;
    Dataset ds = generate_dataset(spec);
    ds.mos.assign(ds.mos.size(), 50.0);

    TrainConfig cfg = small_config(LossKind::norm_in_norm);
    cfg.batch_size = 8;
    const ConvergenceLog log = train(ds, cfg);

    REQUIRE(log.epochs.empty());
    REQUIRE(log.divergence.has_value());
    REQUIRE(log.divergence->epoch == 1);
    REQUIRE(log.divergence->batch == -1);
    REQUIRE(log.divergence->reason == "every batch in the epoch was degenerate");
    // 42 training rows in batches of 8: five full batches plus a pair.
    REQUIRE(log.degenerate_batches_skipped == 6);
}

TEST_CASE("constant labels stop scale-dependent losses at evaluation", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 60;
    spec.dim = 3;
    spec.seed = 9;
    Dataset ds = generate_dataset(spec);
    ds.mos.assign(ds.mos.size(), 50.0);

    TrainConfig cfg = small_config(LossKind::mae);
    cfg.batch_size = 8;
    const ConvergenceLog log = train(ds, cfg);

    REQUIRE(log.divergence.has_value());
    REQUIRE(log.divergence->batch == -1);
    REQUIRE(log.divergence->reason == "degenerate predictions at evaluation");
    REQUIRE(log.degenerate_batches_skipped == 0);
}

TEST_CASE("runaway steps are recorded as divergence, not thrown", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 120;
    spec.dim = 4;
    spec.seed = 4;
    const Dataset ds = generate_dataset(spec);

    TrainConfig cfg;
    cfg.loss_kind = LossKind::mse;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.learning_rate = 1e6;
    cfg.batch_size = 16;
    cfg.epochs = 10;
    cfg.seed = 1;
    cfg.model_kind = ModelKind::linear;

    const ConvergenceLog log = train(ds, cfg);
    REQUIRE(log.divergence.has_value());
    // Depending on where overflow bites first this surfaces as non-finite
    // values or as an evaluation whose calibrated predictions collapse.
    const std::string& reason = log.divergence->reason;
    REQUIRE((reason.find("non-finite") != std::string::npos ||
             reason.find("degenerate predictions at evaluation") != std::string::npos));
    REQUIRE(log.epochs.size() < 10);
    REQUIRE(log.divergence->epoch == static_cast<int>(log.epochs.size()) + 1);
}

TEST_CASE("first-epoch metrics are invariant to label scale", "[trainer]") {
    SyntheticSpec spec;
    spec.n_samples = 120;
    spec.dim = 4;
    spec.seed = 13;
    const Dataset ds = generate_dataset(spec);
    Dataset scaled = ds;
    for (double& v : scaled.mos) v *= 100.0;

    TrainConfig cfg = small_config(LossKind::norm_in_norm);
    cfg.epochs = 1;
    const ConvergenceLog a = train(ds, cfg);
    const ConvergenceLog b = train(scaled, cfg);

    REQUIRE(a.epochs.size() == 1);
    REQUIRE(b.epochs.size() == 1);
    REQUIRE(a.epochs[0].train_loss == Approx(b.epochs[0].train_loss).margin(1e-10));
    REQUIRE(a.epochs[0].val_plcc == Approx(b.epochs[0].val_plcc).margin(1e-10));
    REQUIRE(a.epochs[0].val_srocc == Approx(b.epochs[0].val_srocc).margin(1e-10));
    // RMSE is measured in label units, so it scales with them.
    REQUIRE(a.epochs[0].val_rmse * 100.0 == Approx(b.epochs[0].val_rmse).epsilon(1e-8));
}

TEST_CASE("evaluate_split computes calibrated metrics and rejects empty splits",
          "[trainer]") {
    Dataset ds;
    ds.features = RowMatrix(8, 1);
    for (std::size_t r = 0; r < 8; ++r) ds.features(r, 0) = static_cast<double>(r + 1);
    ds.mos.resize(8);
    for (std::size_t r = 0; r < 8; ++r) ds.mos[r] = 2.0 * ds.features(r, 0) + 1.0;
    ds.split = {Split::train, Split::train, Split::train, Split::train,
                Split::val, Split::val, Split::test, Split::test};

    ToyModel exact = make_linear(1);
    exact.params = {2.0, 1.0};
    const SplitMetrics m = evaluate_split(exact, ds, Split::test, CalibrationLine{});
    REQUIRE(m.plcc == Approx(1.0).margin(1e-12));
    REQUIRE(m.srocc == Approx(1.0).margin(1e-12));
    REQUIRE(m.rmse == Approx(0.0).margin(1e-12));

    Dataset no_test = ds;
    for (Split& s : no_test.split) s = Split::train;
    REQUIRE_THROWS_AS(evaluate_split(exact, no_test, Split::test, CalibrationLine{}),
                      InvalidSpec);
}
