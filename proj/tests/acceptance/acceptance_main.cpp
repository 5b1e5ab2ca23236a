// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "ino/checkpoint.hpp"
#include "ino/darcy.hpp"
#include "ino/evaluation.hpp"
#include "ino/lps.hpp"
#include "ino/training.hpp"
#include "support/dense_reference.hpp"

using namespace ino;
using clk = std::chrono::steady_clock;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct Outcome {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Outcome> g_results;

void record(int id, bool pass, const std::string& detail) {
    g_results.push_back({id, pass, detail});
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

Tensor random_field(std::size_t m, std::size_t width, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor f({m, width});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(lo, hi);
    return f;
}

OperatorConfig check_config(Architecture arch) {
    const ChannelLayout layout = is_vector_output(arch) ? ChannelLayout::vector_bc_to_displacement()
                                                        : ChannelLayout::scalar_to_scalar();
    OperatorConfig cfg = OperatorConfig::desk(arch, layout);
    cfg.kernel_hidden = {16, 16};
    return cfg;
}

// Max deviation over `draws` random models x `trials` random rigid motions.
double theorem_deviation(Architecture arch, const PointCloud& cloud, std::size_t draws,
                         std::size_t trials, std::uint64_t seed) {
    const OperatorConfig cfg = check_config(arch);
    double worst = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        const ModelParams mp = init_params(cfg, Rng::derive(seed, d));
        Rng rng(Rng::derive(seed, 1000 + d));
        const Tensor f = random_field(cloud.num_nodes(), cfg.layout.f_width(), rng);
        if (is_vector_output(arch)) {
            const auto variant = arch == Architecture::ino_vector_position
                                     ? EquivarianceVariant::position
                                     : EquivarianceVariant::displacement;
            worst = std::max(worst, check_equivariance(mp, cloud, f, trials, Rng::derive(seed, 2000 + d),
                                                       variant));
        } else {
            worst = std::max(worst, check_invariance(mp, cloud, f, trials, Rng::derive(seed, 2000 + d)));
        }
    }
    return worst;
}

// --------------------------------------------------------------------------
// criteria 1-3: invariance/equivariance theorems and the negative control
// --------------------------------------------------------------------------

void criterion_1(const PointCloud& grid, const PointCloud& disk) {
    const auto t0 = clk::now();
    const double dev_grid = theorem_deviation(Architecture::ino_scalar, grid, 20, 20, 11);
    const double dev_disk = theorem_deviation(Architecture::ino_scalar, disk, 20, 20, 12);
    const double seconds = std::chrono::duration<double>(clk::now() - t0).count();
    const double dev = std::max(dev_grid, dev_disk);
    record(1, dev <= 1e-10 && seconds <= 60.0,
           fmt("invariance of the scalar operator: max deviation %.2e (grid %.2e, disk %.2e), %.0f s",
               dev, dev_grid, dev_disk, seconds));
}

void criterion_2(const PointCloud& grid, const PointCloud& disk) {
    const double disp = std::max(theorem_deviation(Architecture::ino_vector, grid, 20, 20, 21),
                                 theorem_deviation(Architecture::ino_vector, disk, 20, 20, 22));
    const double pos = std::max(theorem_deviation(Architecture::ino_vector_position, grid, 20, 20, 23),
                                theorem_deviation(Architecture::ino_vector_position, disk, 20, 20, 24));
    record(2, disp <= 1e-10 && pos <= 1e-10,
           fmt("equivariance of the vector operators: displacement %.2e, position %.2e", disp, pos));
}

void criterion_3(const PointCloud& grid) {
    const OperatorConfig ino_cfg = check_config(Architecture::ino_scalar);
    const OperatorConfig gno_cfg = check_config(Architecture::gno);
    const FrameTransform quarter = FrameTransform::rotation(kPi / 2);
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < 20; ++d) {
        Rng rng(Rng::derive(31, d));
        const Tensor f = random_field(grid.num_nodes(), 1, rng);
        const ModelParams imp = init_params(ino_cfg, Rng::derive(32, d));
        const ModelParams gmp = init_params(gno_cfg, Rng::derive(32, d));
        const double ino_dev = transform_deviation(imp, grid, f, quarter);
        const double gno_dev = transform_deviation(gmp, grid, f, quarter);
        min_ratio = std::min(min_ratio, gno_dev / std::max(ino_dev, 1e-300));
    }
    record(3, min_ratio >= 100.0,
           fmt("gno deviates >= 100x the paired ino under a quarter turn: min ratio %.1e", min_ratio));
}

void criterion_4() {
    bool pass = true;
    double worst = 0.0;
    std::string worst_arch;
    for (Architecture arch : {Architecture::gno, Architecture::ino_scalar, Architecture::norm_ino,
                              Architecture::ino_vector, Architecture::ino_vector_position}) {
        OperatorConfig cfg = check_config(arch);
        cfg.hidden_dim = 4;
        cfg.kernel_hidden = {8, 8};
        cfg.layers = 2;
        const GradCheckReport report = model_grad_check(cfg, 77, 1e-6);
        pass = pass && report.pass;
        if (report.max_rel_err > worst) {
            worst = report.max_rel_err;
            worst_arch = architecture_name(arch);
        }
    }
    record(4, pass, fmt("tape gradients vs finite differences, all architectures: worst %.2e (%s)",
                        worst, worst_arch.c_str()));
}

// --------------------------------------------------------------------------
// criterion 5: Darcy solver against the series oracle
// --------------------------------------------------------------------------

double poisson_series(double x, double y, int terms = 399) {
    double s = 0.0;
    for (int m = terms; m >= 1; m -= 2) {
        for (int n = terms; n >= 1; n -= 2) {
            const double mn = static_cast<double>(m) * n;
            s += 16.0 * std::sin(m * kPi * x) * std::sin(n * kPi * y) /
                 (kPi * kPi * kPi * kPi * mn * (static_cast<double>(m) * m + static_cast<double>(n) * n));
        }
    }
    return s;
}

void criterion_5() {
    const std::size_t n = 241;
    const Tensor u = solve_darcy(Tensor::full({n, n}, 1.0));
    const double center = u[(n / 2) * n + n / 2];
    const double oracle = poisson_series(0.5, 0.5);
    const double err_center = std::abs(center - 0.0736713);
    const double err_oracle = std::abs(center - oracle);

    auto smooth = [](std::size_t nn) {
        Tensor k({nn, nn});
        const double h = 1.0 / static_cast<double>(nn - 1);
        for (std::size_t j = 0; j < nn; ++j) {
            for (std::size_t i = 0; i < nn; ++i) {
                k[j * nn + i] = 1.5 + 0.4 * std::sin(2 * kPi * i * h) * std::cos(2 * kPi * j * h);
            }
        }
        return k;
    };
    auto rms_diff = [](const Tensor& a, const Tensor& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s / static_cast<double>(a.size()));
    };
    const Tensor u61 = solve_darcy(smooth(61));
    const Tensor d121 = downsample(solve_darcy(smooth(121)), 61);
    const Tensor d241 = downsample(solve_darcy(smooth(241)), 61);
    const double order = std::log2(rms_diff(u61, d121) / rms_diff(d121, d241));

    record(5, err_center <= 2e-4 && err_oracle <= 2e-4 && order >= 1.7 && order <= 2.3,
           fmt("darcy: u(.5,.5)=%.7f vs oracle %.7f (|d|=%.1e), convergence order %.2f", center, oracle,
               err_oracle, order));
}

// --------------------------------------------------------------------------
// criterion 6: LPS null space at spacing 0.025
// --------------------------------------------------------------------------

void criterion_6() {
    LpsConfig cfg;
    cfg.spacing = 0.025;
    cfg.material = LpsMaterial{2.0, 1.0, 4.0, 2.0};
    const PointCloud cloud = make_disk(cfg.spacing, cfg.omega_radius, cfg.b_radius, cfg.bb_radius);
    Rng rng(5);
    const std::vector<int> phase = sample_microstructure(cfg, cloud, rng);

    Tensor u_bc({cloud.num_nodes(), 2});
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        u_bc.at(i, 0) = 0.4;
        u_bc.at(i, 1) = -0.7;
    }
    const Tensor u = solve_lps(cfg, cloud, phase, u_bc);
    double translation_err = 0.0;
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        translation_err = std::max({translation_err, std::abs(u.at(i, 0) - 0.4),
                                    std::abs(u.at(i, 1) + 0.7)});
    }

    const LpsNeighborhoods nb = build_lps_neighborhoods(cloud, cfg.horizon);
    Tensor rot({cloud.num_nodes(), 2});
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        rot.at(i, 0) = -1e-3 * cloud.y(i);
        rot.at(i, 1) = 1e-3 * cloud.x(i);
    }
    const std::vector<double> d = lps_dilatation(cfg, cloud, nb, rot);
    double dil = 0.0;
    for (double v : d) dil = std::max(dil, std::abs(v));

    record(6, translation_err <= 1e-8 && dil <= 1e-6,
           fmt("lps: constant boundary reproduced to %.1e, rotation dilatation %.1e (M=%zu)",
               translation_err, dil, cloud.num_nodes()));
}

// --------------------------------------------------------------------------
// criterion 7: engine vs dense reference on tiny clouds
// --------------------------------------------------------------------------

void criterion_7() {
    Rng rng(71);
    double worst = 0.0;
    for (Architecture arch : {Architecture::gno, Architecture::ino_scalar, Architecture::norm_ino,
                              Architecture::ino_vector, Architecture::ino_vector_position}) {
        OperatorConfig cfg = check_config(arch);
        cfg.hidden_dim = 4;
        cfg.kernel_hidden = {6, 5};
        cfg.layers = 3;
        const ModelParams mp = init_params(cfg, 100 + static_cast<std::uint64_t>(arch));
        for (std::size_t m : {2ul, 4ul, 5ul}) {
            PointCloud cloud;
            cloud.coords = Tensor({m, 2});
            for (std::size_t i = 0; i < 2 * m; ++i) cloud.coords[i] = rng.uniform(-1.0, 1.0);
            for (std::size_t i = 0; i < m; ++i) cloud.quad_weights.push_back(rng.uniform(0.1, 0.4));
            const Tensor f = random_field(m, cfg.layout.f_width(), rng);
            const Tensor mine = forward(mp, cloud, f);
            const Tensor ref = oracle::forward(mp, cloud, f);
            for (std::size_t i = 0; i < mine.size(); ++i) {
                worst = std::max(worst, std::abs(mine[i] - ref[i]));
            }
        }
    }
    record(7, worst <= 1e-12, fmt("layer updates vs dense triple-loop reference: max |diff| %.2e", worst));
}

// --------------------------------------------------------------------------
// criteria 8-12: training protocol on the Darcy benchmark
// --------------------------------------------------------------------------

struct TrainedPair {
    ModelParams ino;
    ModelParams gno;
    double ino_err = 0.0;
    double gno_err = 0.0;
};

OperatorConfig training_config(Architecture arch) {
    OperatorConfig cfg = OperatorConfig::desk(arch, ChannelLayout::scalar_to_scalar());
    cfg.radius = 0.25;  // keeps the five paired runs inside a workstation budget
    return cfg;
}

TrainConfig training_protocol(std::uint64_t seed) {
    TrainConfig tc;
    tc.lr = 3e-3;
    tc.decay = 0.9;
    tc.decay_interval = 50;
    tc.reg = 1e-6;
    tc.max_epochs = 2000;
    tc.patience = 60;
    tc.seed = seed;
    return tc;
}

void criteria_8_to_12(const Dataset& ds16, const Dataset& ds31) {
    std::vector<TrainedPair> runs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainedPair pair{init_params_for_data(training_config(Architecture::ino_scalar), seed, ds16),
                         init_params_for_data(training_config(Architecture::gno), seed, ds16),
                         0.0,
                         0.0};
        const auto t0 = clk::now();
        const TrainReport ri = fit(training_protocol(seed), pair.ino, ds16);
        const TrainReport rg = fit(training_protocol(seed), pair.gno, ds16);
        pair.ino_err = evaluate(pair.ino, ds16, Split::test);
        pair.gno_err = evaluate(pair.gno, ds16, Split::test);
        std::printf("  seed %llu: ino %.4f (%zu epochs), gno %.4f (%zu epochs), %.0f s\n",
                    static_cast<unsigned long long>(seed), pair.ino_err, ri.epochs(), pair.gno_err,
                    rg.epochs(), std::chrono::duration<double>(clk::now() - t0).count());
        std::fflush(stdout);
        runs.push_back(std::move(pair));
    }

    int ino_ok = 0, beats_gno = 0;
    for (const TrainedPair& r : runs) {
        if (r.ino_err <= 0.15) ++ino_ok;
        if (r.ino_err <= r.gno_err) ++beats_gno;
    }
    record(8, ino_ok >= 4 && beats_gno >= 4,
           fmt("desk-scale learning: ino <= 15%% in %d/5 seeds, ino <= gno in %d/5 seeds", ino_ok,
               beats_gno));

    // ---- criterion 9: transform sweep with the trained seed-1 models
    const ModelParams& ino1 = runs[0].ino;
    const ModelParams& gno1 = runs[0].gno;
    SweepSpec rotate;
    rotate.mode = TransformMode::rotate;
    rotate.ranges = {0.0, kPi / 4, kPi / 2, kPi, 2 * kPi};
    rotate.trials = 3;
    rotate.seed = 91;
    SweepSpec translate;
    translate.mode = TransformMode::translate;
    translate.ranges = {0.0, 0.25, 0.5, 1.0};
    translate.trials = 3;
    translate.seed = 92;

    double ino_flatness = 0.0;
    for (const SweepSpec& spec : {rotate, translate}) {
        const SweepResult sweep = transform_sweep(ino1, ds16, spec);
        for (const SweepPoint& p : sweep.points) {
            ino_flatness = std::max(ino_flatness, std::abs(p.mean_error - sweep.points[0].mean_error));
        }
    }
    const SweepResult gno_rot = transform_sweep(gno1, ds16, rotate);
    const double gno_at_0 = gno_rot.points.front().mean_error;
    const double gno_at_pi = gno_rot.points[3].mean_error;
    record(9, ino_flatness <= 1e-8 && gno_at_pi > gno_at_0,
           fmt("sweep: ino curves flat to %.1e; gno rotate error %.3f at C=pi vs %.3f at C=0",
               ino_flatness, gno_at_pi, gno_at_0));

    // ---- criterion 10: resolution transfer of the trained ino
    const ResolutionTransfer rt = resolution_transfer(ino1, ds16, ds31);
    record(10, rt.error_other <= 2.0 * rt.error_original,
           fmt("resolution transfer: %.4f at 16x16 -> %.4f at 31x31 (ratio %.2f)", rt.error_original,
               rt.error_other, rt.error_other / rt.error_original));

    // ---- criterion 11: shallow-to-deep warm start
    int warm_wins = 0;
    const ModelParams warm = shallow_to_deep(ino1, 8);
    TrainConfig one_epoch = training_protocol(0);
    one_epoch.max_epochs = 2;
    one_epoch.patience = 1;
    double warm_first = 0.0, cold_first = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ModelParams w = warm;
        ModelParams c = init_params_for_data(warm.config, 500 + seed, ds16);
        one_epoch.seed = seed;
        warm_first = fit(one_epoch, w, ds16).train_loss.front();
        cold_first = fit(one_epoch, c, ds16).train_loss.front();
        if (warm_first <= cold_first) ++warm_wins;
    }
    record(11, warm_wins == 3,
           fmt("shallow-to-deep: warm L=8 first-epoch loss beats cold init in %d/3 trials (last: %.4f "
               "vs %.4f)",
               warm_wins, warm_first, cold_first));

    // ---- criterion 12: augmentation bookkeeping and invariance
    AugmentSpec spec;
    spec.count = 3;
    spec.translate_range = 1.0;
    spec.rotate_range = 2 * kPi;
    const Dataset aug = augment(ds16, spec, 515);
    const bool size_ok = aug.train_idx.size() == 4 * ds16.train_idx.size();

    const OperatorConfig inv_cfg = OperatorConfig::desk(Architecture::ino_scalar,
                                                        ChannelLayout::scalar_to_scalar());
    const ModelParams probe = init_params_for_data(inv_cfg, 77, ds16);
    double worst = 0.0;
    const std::size_t n_orig = ds16.train_idx.size();
    for (std::size_t c = 0; c < spec.count; ++c) {
        for (std::size_t k = 0; k < n_orig; ++k) {
            const std::size_t idx = ds16.num_samples() + c * n_orig + k;
            const Tensor a = forward(probe, aug.cloud_of(k), aug.f[k]);
            const Tensor b = forward(probe, aug.cloud_of(idx), aug.f[idx]);
            for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
        }
    }
    record(12, size_ok && worst <= 1e-10,
           fmt("augmentation: 10 -> %zu training samples; ino outputs on copies match to %.2e",
               aug.train_idx.size(), worst));
}

}  // namespace

int main() {
    std::printf("== acceptance suite ==\n");
    const auto t_start = clk::now();

    const PointCloud grid = make_grid(16, 16, Rect{0, 0, 1, 1});
    const PointCloud disk = make_disk(0.12, 1.0);
    std::printf("clouds: 16x16 grid (256 nodes), disk (%zu nodes)\n", disk.num_nodes());
    std::fflush(stdout);

    criterion_1(grid, disk);
    criterion_2(grid, disk);
    criterion_3(grid);
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();

    std::printf("generating the Darcy benchmark (10/40/40 at 241x241)...\n");
    std::fflush(stdout);
    DarcyConfig dcfg;
    dcfg.n_train = 10;
    dcfg.n_val = 40;
    dcfg.n_test = 40;
    dcfg.seed = 7;
    const auto datasets = generate_darcy_dataset(dcfg);
    criteria_8_to_12(datasets[0], datasets[1]);

    const double total = std::chrono::duration<double>(clk::now() - t_start).count();
    int failures = 0;
    for (const Outcome& o : g_results) failures += o.pass ? 0 : 1;
    std::printf("== %zu criteria, %d failed, %.0f s total ==\n", g_results.size(), failures, total);
    return failures == 0 ? 0 : 1;
}
