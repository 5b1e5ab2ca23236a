#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "ino/checkpoint.hpp"
#include "ino/darcy.hpp"
#include "ino/dataset.hpp"
#include "ino/evaluation.hpp"
#include "ino/lps.hpp"
#include "ino/serialize.hpp"
#include "ino/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flat JSON config file support; nested objects scope to subcommands.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j = json::parse(input);
        std::vector<CLI::ConfigItem> results;
        std::function<void(const json&, std::vector<std::string>)> walk = [&](const json& obj,
                                                                              std::vector<std::string> parents) {
            for (auto it = obj.begin(); it != obj.end(); ++it) {
                if (it.value().is_object()) {
                    auto scoped = parents;
                    scoped.push_back(it.key());
                    walk(it.value(), scoped);
                    continue;
                }
                CLI::ConfigItem item;
                item.parents = parents;
                item.name = it.key();
                if (it.value().is_array()) {
                    for (const auto& v : it.value()) {
                        item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
                    }
                } else if (it.value().is_string()) {
                    item.inputs.push_back(it.value().get<std::string>());
                } else {
                    item.inputs.push_back(it.value().dump());
                }
                results.push_back(std::move(item));
            }
        };
        walk(j, {});
        return results;
    }
};

void write_run_config(const fs::path& dir, const json& resolved) {
    fs::create_directories(dir);
    std::ofstream os(dir / "run_config.json");
    os << resolved.dump(2) << "\n";
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        out.push_back(static_cast<std::size_t>(std::stoull(csv.substr(pos, next - pos))));
        pos = next + 1;
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        out.push_back(std::stod(csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

struct GenDarcyOpts {
    std::size_t total = 0;  // when set: train = total - nval - ntest
    std::size_t n_train = 100, n_val = 40, n_test = 40;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t fine = 241;
    std::string resolutions = "16,31";
    double v_low = 3.0;
    double correlation = 1.0 / 3.0;
};

struct GenLpsOpts {
    std::size_t total = 0;
    std::size_t n_train = 100, n_val = 40, n_test = 40;
    std::uint64_t seed = 0;
    std::string out;
    double spacing = 0.05;
    double horizon = 0.3;
    std::vector<double> moduli;  // lambda_glass, mu_glass, lambda_crystal, mu_crystal
    bool placeholder_moduli = false;
    double crystal_fraction = 0.4;
};

struct TrainOpts {
    std::string data;
    std::string out;
    std::string arch = "ino-scalar";
    std::size_t layers = 4;
    std::size_t dh = 16;
    double tau = 0.0;
    std::string kernel_hidden;
    double radius = 0.0;  // 0 = whole domain
    bool paper_scale = false;
    std::size_t ntrain = 0;  // 0 = full training split
    double lr = 1e-3;
    double decay = 0.9;
    std::size_t decay_interval = 50;
    double reg = 0.0;
    std::size_t epochs = 2000;
    std::size_t patience = 60;
    std::size_t batch = 0;
    std::uint64_t seed = 0;
    std::string init_from;
    std::size_t augment = 0;
    double aug_translate = 0.0;
    double aug_rotate = 0.0;
    bool raw_init = false;
};

struct EvalOpts {
    std::string data;
    std::string checkpoint;
    std::string out;
    std::string sweep;  // "", "rotate", "translate"
    std::string Cs;
    std::size_t trials = 1;
    std::string cross_res;
    bool check_theorems = false;
    std::size_t theorem_trials = 20;
    std::uint64_t seed = 0;
};

struct GradcheckOpts {
    std::string arch = "ino-scalar";
    std::size_t layers = 2;
    std::size_t dh = 4;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    std::string checkpoint;
};

ino::Dataset restrict_train(const ino::Dataset& ds, std::size_t ntrain) {
    if (ntrain == 0 || ntrain >= ds.train_idx.size()) return ds;
    ino::Dataset out = ds;
    out.train_idx.resize(ntrain);
    return out;
}

ino::OperatorConfig make_config(const TrainOpts& o, const ino::ChannelLayout& layout) {
    const ino::Architecture arch = ino::architecture_from_name(o.arch);
    ino::OperatorConfig cfg = o.paper_scale ? ino::OperatorConfig::paper(arch, layout)
                                            : ino::OperatorConfig::desk(arch, layout);
    cfg.layers = o.layers;
    if (!o.paper_scale) cfg.hidden_dim = o.dh;
    if (o.tau > 0.0) cfg.tau = o.tau;
    if (!o.kernel_hidden.empty()) cfg.kernel_hidden = parse_size_list(o.kernel_hidden);
    if (o.radius > 0.0) cfg.radius = o.radius;
    cfg.validate();
    return cfg;
}

int run_gen_darcy(const GenDarcyOpts& o) {
    ino::DarcyConfig cfg;
    cfg.n_train = o.n_train;
    if (o.total > 0) {
        if (o.total <= o.n_val + o.n_test) throw CLI::ValidationError("--n must exceed nval + ntest");
        cfg.n_train = o.total - o.n_val - o.n_test;
    }
    cfg.n_val = o.n_val;
    cfg.n_test = o.n_test;
    cfg.seed = o.seed;
    cfg.fine_n = o.fine;
    cfg.resolutions = parse_size_list(o.resolutions);
    cfg.v_low = o.v_low;
    cfg.v_high = 4.0 * o.v_low;
    cfg.correlation = o.correlation;
    cfg.validate();

    const auto datasets = ino::generate_darcy_dataset(cfg);
    const fs::path root(o.out);
    json summary;
    summary["problem"] = "darcy";
    summary["resolutions"] = json::array();
    for (std::size_t r = 0; r < datasets.size(); ++r) {
        const fs::path sub = root / ("res" + std::to_string(cfg.resolutions[r]));
        ino::dataset_write(datasets[r], sub);
        summary["resolutions"].push_back(cfg.resolutions[r]);
    }
    summary["samples"] = cfg.num_samples();
    summary["splits"] = {cfg.n_train, cfg.n_val, cfg.n_test};
    summary["seed"] = cfg.seed;
    write_run_config(root, summary);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_gen_lps(const GenLpsOpts& o) {
    ino::LpsConfig cfg;
    cfg.n_train = o.n_train;
    if (o.total > 0) {
        if (o.total <= o.n_val + o.n_test) throw CLI::ValidationError("--n must exceed nval + ntest");
        cfg.n_train = o.total - o.n_val - o.n_test;
    }
    cfg.n_val = o.n_val;
    cfg.n_test = o.n_test;
    cfg.seed = o.seed;
    cfg.spacing = o.spacing;
    cfg.horizon = o.horizon;
    cfg.crystal_fraction = o.crystal_fraction;
    if (!o.moduli.empty()) {
        if (o.moduli.size() != 4) {
            throw CLI::ValidationError("--moduli needs lambda_glass,mu_glass,lambda_crystal,mu_crystal");
        }
        cfg.material = ino::LpsMaterial{o.moduli[0], o.moduli[1], o.moduli[2], o.moduli[3]};
    } else if (o.placeholder_moduli) {
        // Placeholder values, not calibrated against any published material data.
        cfg.material = ino::LpsMaterial{1.0, 1.0, 2.0, 2.0};
    } else {
        throw CLI::ValidationError(
            "gen lps: material moduli are required; pass --moduli lg,mg,lc,mc or opt into "
            "--placeholder-moduli");
    }
    cfg.validate();

    const ino::Dataset ds = ino::generate_lps_dataset(cfg);
    ino::dataset_write(ds, o.out);
    json summary = json::parse(ds.config_echo);
    summary["nodes"] = ds.cloud->num_nodes();
    write_run_config(o.out, summary);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_train(const TrainOpts& o) {
    ino::Dataset ds = restrict_train(ino::dataset_read(o.data), o.ntrain);

    ino::ModelParams params;
    if (!o.init_from.empty()) {
        ino::ModelParams base = ino::load_checkpoint(o.init_from);
        params = o.layers != base.config.layers ? ino::shallow_to_deep(base, o.layers) : std::move(base);
    } else if (o.raw_init) {
        params = ino::init_params(make_config(o, ds.layout), o.seed);
    } else {
        params = ino::init_params_for_data(make_config(o, ds.layout), o.seed, ds);
    }

    ino::TrainConfig tc;
    tc.lr = o.lr;
    tc.decay = o.decay;
    tc.decay_interval = o.decay_interval;
    tc.reg = o.reg;
    tc.max_epochs = o.epochs;
    tc.patience = o.patience;
    tc.batch_size = o.batch;
    tc.seed = o.seed;
    tc.augment = ino::AugmentSpec{o.augment, o.aug_translate, o.aug_rotate};

    ino::TrainReport report = ino::fit(tc, params, ds);

    const fs::path root(o.out);
    ino::save_checkpoint(params, root / "checkpoint");
    {
        fs::create_directories(root);
        std::ofstream os(root / "train_report.json");
        os << report.to_json() << "\n";
    }
    json resolved;
    resolved["data"] = o.data;
    resolved["architecture"] = std::string(ino::architecture_name(params.config.arch));
    resolved["layers"] = params.config.layers;
    resolved["hidden_dim"] = params.config.hidden_dim;
    resolved["tau"] = params.config.effective_tau();
    resolved["kernel_hidden"] = params.config.kernel_hidden;
    resolved["lr"] = tc.lr;
    resolved["decay"] = tc.decay;
    resolved["decay_interval"] = tc.decay_interval;
    resolved["reg"] = tc.reg;
    resolved["max_epochs"] = tc.max_epochs;
    resolved["patience"] = tc.patience;
    resolved["batch_size"] = tc.batch_size;
    resolved["seed"] = tc.seed;
    resolved["ntrain"] = ds.train_idx.size();
    resolved["augment"] = {{"count", o.augment}, {"translate", o.aug_translate}, {"rotate", o.aug_rotate}};
    resolved["init_from"] = o.init_from;
    write_run_config(root, resolved);

    std::cout << "trained " << report.epochs() << " epochs, best validation error " << report.best_val_error
              << " at epoch " << report.best_epoch << "\n";
    if (report.diverged) {
        std::cerr << "training diverged (non-finite loss)\n";
        return 2;
    }
    return 0;
}

int run_eval(const EvalOpts& o) {
    const ino::Dataset ds = ino::dataset_read(o.data);
    const ino::ModelParams params = ino::load_checkpoint(o.checkpoint);

    ino::EvalReport report;
    report.checkpoint_id = o.checkpoint;
    report.dataset_id = o.data;
    report.seed = o.seed;
    report.mean_test_error = ino::evaluate(params, ds, ino::Split::test);

    if (!o.sweep.empty()) {
        ino::SweepSpec spec;
        spec.mode = o.sweep == "rotate" ? ino::TransformMode::rotate : ino::TransformMode::translate;
        spec.ranges = o.Cs.empty() ? std::vector<double>{0.0, 0.25, 0.5, 1.0} : parse_double_list(o.Cs);
        if (o.sweep == "rotate" && o.Cs.empty()) {
            spec.ranges = {0.0, 0.7853981633974483, 1.5707963267948966, 3.141592653589793,
                           6.283185307179586};
        }
        spec.trials = o.trials;
        spec.seed = o.seed;
        report.sweep = ino::transform_sweep(params, ds, spec);
    }
    if (!o.cross_res.empty()) {
        const ino::Dataset fine = ino::dataset_read(o.cross_res);
        report.resolution = ino::resolution_transfer(params, ds, fine);
    }
    if (o.check_theorems) {
        const std::size_t idx = ds.test_idx.empty() ? 0 : ds.test_idx.front();
        const auto& cloud = ds.cloud_of(idx);
        if (ino::is_vector_output(params.config.arch)) {
            const auto variant = params.config.arch == ino::Architecture::ino_vector_position
                                     ? ino::EquivarianceVariant::position
                                     : ino::EquivarianceVariant::displacement;
            report.checks["equivariance"] = ino::check_equivariance(params, cloud, ds.f[idx],
                                                                    o.theorem_trials, o.seed, variant);
        } else {
            report.checks["invariance"] =
                ino::check_invariance(params, cloud, ds.f[idx], o.theorem_trials, o.seed);
        }
    }

    ino::emit_report(report, o.out);
    json resolved;
    resolved["data"] = o.data;
    resolved["checkpoint"] = o.checkpoint;
    resolved["sweep"] = o.sweep;
    resolved["Cs"] = o.Cs;
    resolved["trials"] = o.trials;
    resolved["cross_res"] = o.cross_res;
    resolved["check_theorems"] = o.check_theorems;
    resolved["seed"] = o.seed;
    write_run_config(o.out, resolved);

    std::cout << ino::report_to_json(report) << "\n";
    return 0;
}

int run_gradcheck(const GradcheckOpts& o) {
    ino::GradCheckReport report;
    if (!o.checkpoint.empty()) {
        const ino::ModelParams params = ino::load_checkpoint(o.checkpoint);
        report = ino::model_grad_check(params.config, o.seed, o.tol);
    } else {
        ino::OperatorConfig cfg = ino::OperatorConfig::desk(ino::architecture_from_name(o.arch),
                                                            ino::is_vector_output(ino::architecture_from_name(
                                                                o.arch))
                                                                ? ino::ChannelLayout::vector_bc_to_displacement()
                                                                : ino::ChannelLayout::scalar_to_scalar());
        cfg.layers = o.layers;
        cfg.hidden_dim = o.dh;
        cfg.kernel_hidden = {8, 8};
        report = ino::model_grad_check(cfg, o.seed, o.tol);
    }
    for (const auto& g : report.groups) {
        std::printf("%-12s max relative error %.3e %s\n", g.name.c_str(), g.max_rel_err,
                    g.max_rel_err <= report.tolerance ? "ok" : "FAIL");
    }
    std::printf("overall %.3e (tolerance %.1e): %s\n", report.max_rel_err, report.tolerance,
                report.pass ? "pass" : "fail");
    return report.pass ? 0 : 2;
}

int run_inspect(const std::string& path) {
    const fs::path p(path);
    const fs::path manifest = fs::is_directory(p) ? p / "manifest" : p;
    std::ifstream is(manifest);
    if (!is) throw std::runtime_error("inspect: no manifest at " + manifest.string());
    json j = json::parse(is);
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"invariant neural operators: data generation, training, evaluation"};
    app.require_subcommand(1);
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file; command-line flags override");
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads");

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->require_subcommand(1);

    GenDarcyOpts gd;
    auto* gen_darcy = gen->add_subcommand("darcy", "two-phase Darcy flow on the unit square");
    gen_darcy->add_option("--n", gd.total, "total samples (train = n - nval - ntest)");
    gen_darcy->add_option("--ntrain", gd.n_train, "training samples");
    gen_darcy->add_option("--nval", gd.n_val, "validation samples");
    gen_darcy->add_option("--ntest", gd.n_test, "test samples");
    gen_darcy->add_option("--seed", gd.seed, "master seed");
    gen_darcy->add_option("--out", gd.out, "output directory")->required();
    gen_darcy->add_option("--fine", gd.fine, "fine-grid resolution");
    gen_darcy->add_option("--res", gd.resolutions, "output resolutions, comma separated");
    gen_darcy->add_option("--vlow", gd.v_low, "low conductivity (high is 4x)");
    gen_darcy->add_option("--correlation", gd.correlation, "phase-field correlation scale");

    GenLpsOpts gl;
    auto* gen_lps = gen->add_subcommand("lps", "linear peridynamic solid on a disk");
    gen_lps->add_option("--n", gl.total, "total samples (train = n - nval - ntest)");
    gen_lps->add_option("--ntrain", gl.n_train, "training samples");
    gen_lps->add_option("--nval", gl.n_val, "validation samples");
    gen_lps->add_option("--ntest", gl.n_test, "test samples");
    gen_lps->add_option("--seed", gl.seed, "master seed");
    gen_lps->add_option("--out", gl.out, "output directory")->required();
    gen_lps->add_option("--spacing", gl.spacing, "node spacing");
    gen_lps->add_option("--horizon", gl.horizon, "peridynamic horizon");
    gen_lps->add_option("--moduli", gl.moduli,
                        "lambda_glass,mu_glass,lambda_crystal,mu_crystal (required unless "
                        "--placeholder-moduli)");
    gen_lps->add_flag("--placeholder-moduli", gl.placeholder_moduli,
                      "opt into uncalibrated placeholder moduli (glass 1/1, crystal 2/2)");
    gen_lps->add_option("--crystal-fraction", gl.crystal_fraction, "crystal volume fraction");

    TrainOpts to;
    auto* train = app.add_subcommand("train", "fit an operator to a dataset");
    train->add_option("--data", to.data, "dataset directory")->required();
    train->add_option("--out", to.out, "output directory")->required();
    train->add_option("--arch", to.arch, "gno | ino-scalar | ino-vector | ino-vector-position | norm-ino");
    train->add_option("--L", to.layers, "iterative layer count");
    train->add_option("--dh", to.dh, "hidden representation width");
    train->add_option("--tau", to.tau, "fictitious time step (default 1/L)");
    train->add_option("--kernel-hidden", to.kernel_hidden, "kernel MLP hidden widths, comma separated");
    train->add_option("--radius", to.radius, "integration ball radius (default: whole domain)");
    train->add_flag("--paper-scale", to.paper_scale, "use the full-scale widths (d_h=64, kernel 512/1024)");
    train->add_option("--ntrain", to.ntrain, "restrict the training split to its first N samples");
    train->add_option("--lr", to.lr, "learning rate");
    train->add_option("--decay", to.decay, "learning-rate decay factor");
    train->add_option("--decay-interval", to.decay_interval, "epochs between decays");
    train->add_option("--reg", to.reg, "L2 regularization coefficient");
    train->add_option("--epochs", to.epochs, "maximum epochs");
    train->add_option("--patience", to.patience, "early-stopping patience (epochs)");
    train->add_option("--batch", to.batch, "batch size (0 = full batch)");
    train->add_option("--seed", to.seed, "seed for init and shuffling");
    train->add_option("--init-from", to.init_from, "warm-start from a checkpoint (shallow-to-deep aware)");
    train->add_option("--augment", to.augment, "transformed copies per training sample");
    train->add_option("--aug-translate", to.aug_translate, "augmentation shift range C");
    train->add_option("--aug-rotate", to.aug_rotate, "augmentation rotation range C");
    train->add_flag("--raw-init", to.raw_init, "skip data-calibrated initialization scaling");

    EvalOpts eo;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--data", eo.data, "dataset directory")->required();
    eval->add_option("--checkpoint", eo.checkpoint, "checkpoint directory")->required();
    eval->add_option("--out", eo.out, "output directory")->required();
    eval->add_option("--sweep", eo.sweep, "rotate | translate");
    eval->add_option("--Cs", eo.Cs, "sweep ranges, comma separated");
    eval->add_option("--trials", eo.trials, "sweep trials per range");
    eval->add_option("--cross-res", eo.cross_res, "second dataset for resolution transfer");
    eval->add_flag("--check-theorems", eo.check_theorems, "report invariance/equivariance deviations");
    eval->add_option("--theorem-trials", eo.theorem_trials, "random transforms per theorem check");
    eval->add_option("--seed", eo.seed, "seed for random transforms");

    GradcheckOpts go;
    auto* gradcheck = app.add_subcommand("gradcheck", "tape gradients vs finite differences");
    gradcheck->add_option("--arch", go.arch, "architecture");
    gradcheck->add_option("--L", go.layers, "layers");
    gradcheck->add_option("--dh", go.dh, "hidden width");
    gradcheck->add_option("--tol", go.tol, "tolerance");
    gradcheck->add_option("--seed", go.seed, "seed");
    gradcheck->add_option("--checkpoint", go.checkpoint, "check a saved model instead");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "print a dataset or checkpoint manifest");
    inspect->add_option("path", inspect_path, "dataset/checkpoint directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    try {
        if (gen_darcy->parsed()) return run_gen_darcy(gd);
        if (gen_lps->parsed()) return run_gen_lps(gl);
        if (train->parsed()) return run_train(to);
        if (eval->parsed()) return run_eval(eo);
        if (gradcheck->parsed()) return run_gradcheck(go);
        if (inspect->parsed()) return run_inspect(inspect_path);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
