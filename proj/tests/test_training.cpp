#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ino/evaluation.hpp"
#include "ino/training.hpp"

using namespace ino;

namespace {

// Tiny supervised task: targets come from a frozen random "teacher" model of
// the same architecture, so a perfect fit exists.
Dataset teacher_dataset(const OperatorConfig& cfg, std::size_t n_train, std::size_t n_val,
                        std::size_t n_test, std::uint64_t seed) {
    Dataset ds;
    ds.problem = "teacher";
    ds.layout = cfg.layout;
    ds.cloud = std::make_shared<PointCloud>(make_grid(4, 4, Rect{0, 0, 1, 1}));
    ds.seed = seed;
    const ModelParams teacher = init_params(cfg, Rng::derive(seed, 999));
    Rng rng(seed);
    const std::size_t m = ds.cloud->num_nodes();
    for (std::size_t s = 0; s < n_train + n_val + n_test; ++s) {
        Tensor f({m, cfg.layout.f_width()});
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(-1.0, 1.0);
        Tensor u = forward(teacher, *ds.cloud, f);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.01 * rng.uniform(-1.0, 1.0);
        ds.f.push_back(std::move(f));
        ds.u.push_back(std::move(u));
    }
    ds.set_contiguous_splits(n_train, n_val, n_test);
    return ds;
}

OperatorConfig small_config(Architecture arch = Architecture::ino_scalar) {
    OperatorConfig cfg = OperatorConfig::desk(arch, is_vector_output(arch)
                                                        ? ChannelLayout::vector_bc_to_displacement()
                                                        : ChannelLayout::scalar_to_scalar());
    cfg.hidden_dim = 4;
    cfg.kernel_hidden = {8};
    cfg.layers = 2;
    return cfg;
}

}  // namespace

TEST_CASE("relative_l2 basics") {
    const Tensor truth({4, 1}, {1.0, -2.0, 0.5, 3.0});
    CHECK(relative_l2(truth, truth) == 0.0);
    CHECK(relative_l2(Tensor({4, 1}), truth) == doctest::Approx(1.0).epsilon(1e-15));

    Tensor pred = truth;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] *= 1.1;
    CHECK(relative_l2(pred, truth) == doctest::Approx(0.1).epsilon(1e-12));

    for (double alpha : {0.0, 0.3, 1.0, 2.5}) {
        Tensor scaled = truth;
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= alpha;
        CHECK(relative_l2(scaled, truth) == doctest::Approx(std::abs(alpha - 1.0)).epsilon(1e-12));
    }

    CHECK_THROWS_AS(relative_l2(truth, Tensor({4, 1})), std::invalid_argument);
    CHECK_THROWS_AS(relative_l2(truth, Tensor({2, 1}, {1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("batch loss: perfect model, regularization, and batch mean") {
    OperatorConfig cfg = small_config();
    const ModelParams mp = init_params(cfg, 31);
    Dataset ds = teacher_dataset(cfg, 2, 1, 1, 12);
    // make the labels exactly the model's own outputs
    for (std::size_t s = 0; s < ds.num_samples(); ++s) ds.u[s] = forward(mp, *ds.cloud, ds.f[s]);

    CHECK(batch_loss(mp, ds, ds.train_idx, 0.0) == 0.0);

    double sq = 0.0;
    for (const Tensor& t : mp.tensors) {
        for (double v : t.values()) sq += v * v;
    }
    CHECK(batch_loss(mp, ds, ds.train_idx, 0.01) == doctest::Approx(0.01 * sq).epsilon(1e-12));

    // batch of two is the mean of the two single-sample losses
    Dataset noisy = ds;
    noisy.u[0][0] += 0.5;
    noisy.u[1][3] += 0.25;
    const double l0 = batch_loss(mp, noisy, {0}, 0.0);
    const double l1 = batch_loss(mp, noisy, {1}, 0.0);
    CHECK(batch_loss(mp, noisy, {0, 1}, 0.0) == doctest::Approx(0.5 * (l0 + l1)).epsilon(1e-13));

    CHECK_THROWS_AS(batch_loss(mp, ds, {}, 0.0), std::invalid_argument);
}

TEST_CASE("learning-rate schedule decays every interval") {
    TrainConfig tc;
    tc.lr = 3e-3;
    tc.decay = 0.7;
    tc.decay_interval = 50;
    CHECK(scheduled_lr(tc, 0) == 3e-3);
    CHECK(scheduled_lr(tc, 49) == 3e-3);
    CHECK(scheduled_lr(tc, 50) == doctest::Approx(3e-3 * 0.7).epsilon(1e-15));
    CHECK(scheduled_lr(tc, 149) == doctest::Approx(3e-3 * 0.7 * 0.7).epsilon(1e-15));
}

TEST_CASE("fit descends, retains the best checkpoint, and stops on patience") {
    OperatorConfig cfg = small_config();
    Dataset ds = teacher_dataset(cfg, 4, 2, 2, 5);
    ModelParams params = init_params(cfg, 7);

    TrainConfig tc;
    tc.lr = 3e-3;
    tc.max_epochs = 120;
    tc.patience = 25;
    tc.seed = 1;

    const double initial = batch_loss(params, ds, ds.train_idx, 0.0);
    TrainReport report = fit(tc, params, ds);
    REQUIRE(report.epochs() >= 1);
    CHECK_FALSE(report.diverged);
    CHECK(report.train_loss.back() < initial);
    CHECK(report.train_loss.front() <= initial * 1.001);

    // returned parameters reproduce the reported best validation error
    double val = 0.0;
    for (std::size_t idx : ds.val_idx) {
        val += relative_l2(forward(params, ds.cloud_of(idx), ds.f[idx]), ds.u[idx]);
    }
    val /= static_cast<double>(ds.val_idx.size());
    CHECK(val == doctest::Approx(report.best_val_error).epsilon(1e-12));

    // stopped either at the epoch cap or within patience of the best epoch
    if (report.epochs() < tc.max_epochs) {
        CHECK(report.epochs() == report.best_epoch + tc.patience + 1);
    }
}

TEST_CASE("fit is deterministic in the seed") {
    OperatorConfig cfg = small_config();
    Dataset ds = teacher_dataset(cfg, 3, 1, 1, 21);
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.max_epochs = 10;
    tc.patience = 9;
    tc.seed = 3;

    ModelParams a = init_params(cfg, 11);
    ModelParams b = init_params(cfg, 11);
    fit(tc, a, ds);
    fit(tc, b, ds);
    for (std::size_t k = 0; k < a.tensors.size(); ++k) {
        for (std::size_t i = 0; i < a.tensors[k].size(); ++i) {
            CHECK(a.tensors[k][i] == b.tensors[k][i]);
        }
    }
}

TEST_CASE("divergence aborts with a partial report") {
    OperatorConfig cfg = small_config();
    Dataset ds = teacher_dataset(cfg, 3, 1, 1, 2);
    ModelParams params = init_params(cfg, 1);
    TrainConfig tc;
    tc.lr = 1e160;  // one step puts the squared kernel activations past the float64 range
    tc.max_epochs = 50;
    tc.patience = 40;
    TrainReport report = fit(tc, params, ds);
    CHECK(report.diverged);
    CHECK(report.epochs() < 50);
}

TEST_CASE("shallow_to_deep preserves tensors and the fictitious horizon") {
    OperatorConfig cfg = small_config();
    cfg.layers = 4;
    ModelParams base = init_params(cfg, 77);

    const ModelParams same = shallow_to_deep(base, 4);
    CHECK(same.config.layers == 4);
    CHECK(same.config.effective_tau() == doctest::Approx(0.25));

    const ModelParams deep = shallow_to_deep(base, 8);
    CHECK(deep.config.layers == 8);
    CHECK(deep.config.effective_tau() == doctest::Approx(0.125));
    for (std::size_t k = 0; k < base.tensors.size(); ++k) {
        for (std::size_t i = 0; i < base.tensors[k].size(); ++i) {
            CHECK(deep.tensors[k][i] == base.tensors[k][i]);
        }
    }
    CHECK_THROWS_AS(shallow_to_deep(deep, 4), std::invalid_argument);

    // warm start is at least as good as a fresh random deep model on epoch one
    Dataset ds = teacher_dataset(cfg, 4, 2, 2, 31);
    TrainConfig tc;
    tc.lr = 3e-3;
    tc.max_epochs = 60;
    tc.patience = 20;
    ModelParams trained = init_params(cfg, 5);
    fit(tc, trained, ds);

    TrainConfig one;
    one.max_epochs = 2;
    one.patience = 1;
    ModelParams warm = shallow_to_deep(trained, 8);
    ModelParams cold = init_params(warm.config, 6);
    TrainReport warm_report = fit(one, warm, ds);
    TrainReport cold_report = fit(one, cold, ds);
    CHECK(warm_report.train_loss.front() <= cold_report.train_loss.front());
}

TEST_CASE("grid search returns the best validated combination") {
    OperatorConfig cfg = small_config();
    Dataset ds = teacher_dataset(cfg, 3, 2, 1, 41);
    TrainConfig base;
    base.max_epochs = 8;
    base.patience = 6;
    base.seed = 2;
    const double lrs[] = {3e-3, 1e-5};
    const double decays[] = {0.9};
    const double regs[] = {0.0};
    const GridSearchResult result = grid_search(cfg, ds, base, lrs, decays, regs);
    REQUIRE(result.tried.size() == 2);
    CHECK(result.best.val_error == std::min(result.tried[0].val_error, result.tried[1].val_error));
    CHECK(result.best.val_error <= result.tried[1].val_error);
}

TEST_CASE("augmentation appends transformed training copies only") {
    OperatorConfig cfg = small_config();
    Dataset ds = teacher_dataset(cfg, 10, 2, 2, 13);

    AugmentSpec spec;
    spec.count = 3;
    spec.translate_range = 1.0;
    spec.rotate_range = 6.283185307179586;
    const Dataset aug = augment(ds, spec, 99);
    CHECK(aug.train_idx.size() == 40);
    CHECK(aug.val_idx == ds.val_idx);
    CHECK(aug.test_idx == ds.test_idx);
    CHECK(aug.num_samples() == ds.num_samples() + 30);

    AugmentSpec zero;
    zero.count = 2;
    const Dataset copies = augment(ds, zero, 99);
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t k = 0; k < 10; ++k) {
            const std::size_t idx = ds.num_samples() + c * 10 + k;
            for (std::size_t i = 0; i < ds.f[k].size(); ++i) CHECK(copies.f[idx][i] == ds.f[k][i]);
            for (std::size_t i = 0; i < ds.cloud->coords.size(); ++i) {
                CHECK(copies.cloud_of(idx).coords[i] == ds.cloud->coords[i]);
            }
        }
    }
}

TEST_CASE("invariant models score augmented copies exactly like the originals") {
    OperatorConfig cfg = small_config();
    Dataset ds = teacher_dataset(cfg, 4, 1, 1, 17);
    AugmentSpec spec;
    spec.count = 2;
    spec.translate_range = 1.0;
    spec.rotate_range = 6.283185307179586;
    const Dataset aug = augment(ds, spec, 7);
    const ModelParams mp = init_params(cfg, 23);

    for (std::size_t c = 0; c < spec.count; ++c) {
        for (std::size_t k = 0; k < 4; ++k) {
            const std::size_t idx = ds.num_samples() + c * 4 + k;
            const double orig = relative_l2(forward(mp, ds.cloud_of(k), ds.f[k]), ds.u[k]);
            const double moved = relative_l2(forward(mp, aug.cloud_of(idx), aug.f[idx]), aug.u[idx]);
            CHECK(std::abs(orig - moved) <= 1e-10);
        }
    }
}
