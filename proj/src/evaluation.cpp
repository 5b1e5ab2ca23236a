#include "ino/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ino/training.hpp"

namespace ino {

using nlohmann::json;

const std::vector<std::size_t>& split_indices(const Dataset& ds, Split split) {
    switch (split) {
        case Split::train: return ds.train_idx;
        case Split::val: return ds.val_idx;
        case Split::test: return ds.test_idx;
    }
    throw std::logic_error("split_indices: unknown split");
}

double evaluate(const ModelParams& params, const Dataset& ds, Split split) {
    const auto& indices = split_indices(ds, split);
    if (indices.empty()) throw std::invalid_argument("evaluate: empty split");
    double s = 0.0;
    for (std::size_t idx : indices) {
        s += relative_l2(forward(params, ds.cloud_of(idx), ds.f[idx]), ds.u[idx]);
    }
    return s / static_cast<double>(indices.size());
}

namespace {

// Max over nodes of |out_T(i) - ref(i)| / (1 + |ref(i)|), row-wise euclidean.
double max_row_deviation(const Tensor& out_t, const Tensor& ref) {
    double worst = 0.0;
    const std::size_t cols = ref.ndim() == 2 ? ref.cols() : 1;
    const std::size_t rows = ref.size() / cols;
    for (std::size_t i = 0; i < rows; ++i) {
        double dd = 0.0, rr = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = out_t[i * cols + c] - ref[i * cols + c];
            dd += d * d;
            rr += ref[i * cols + c] * ref[i * cols + c];
        }
        worst = std::max(worst, std::sqrt(dd) / (1.0 + std::sqrt(rr)));
    }
    return worst;
}

Tensor expected_output(const Tensor& out, const FrameTransform& t, Architecture arch) {
    if (!is_vector_output(arch)) return out;  // invariant
    Tensor exp({out.rows(), 2});
    const bool with_shift = arch == Architecture::ino_vector_position;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const auto v = t.rotate(out.at(i, 0), out.at(i, 1));
        exp.at(i, 0) = v[0] + (with_shift ? t.g[0] : 0.0);
        exp.at(i, 1) = v[1] + (with_shift ? t.g[1] : 0.0);
    }
    return exp;
}

}  // namespace

double transform_deviation(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                           const FrameTransform& t) {
    const Tensor out = forward(params, cloud, f);
    auto [moved_cloud, moved_sample] =
        apply_transform(cloud, FunctionSample{f, Tensor{}}, t, params.config.layout);
    const Tensor out_t = forward(params, moved_cloud, moved_sample.f);
    return max_row_deviation(out_t, expected_output(out, t, params.config.arch));
}

namespace {

double check_deviation(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                       std::size_t trials, std::uint64_t seed, double translate_C, double rotate_C) {
    const Tensor out = forward(params, cloud, f);
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const FrameTransform tf = random_rigid(translate_C, rotate_C, rng);
        auto [moved_cloud, moved_sample] =
            apply_transform(cloud, FunctionSample{f, Tensor{}}, tf, params.config.layout);
        const Tensor out_t = forward(params, moved_cloud, moved_sample.f);
        worst = std::max(worst, max_row_deviation(out_t, expected_output(out, tf, params.config.arch)));
    }
    return worst;
}

}  // namespace

double check_invariance(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                        std::size_t trials, std::uint64_t seed, double translate_C, double rotate_C) {
    if (is_vector_output(params.config.arch)) {
        throw std::invalid_argument("check_invariance: architecture has vector output; use "
                                    "check_equivariance");
    }
    return check_deviation(params, cloud, f, trials, seed, translate_C, rotate_C);
}

double check_equivariance(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                          std::size_t trials, std::uint64_t seed, EquivarianceVariant variant,
                          double translate_C, double rotate_C) {
    const Architecture arch = params.config.arch;
    if (!is_vector_output(arch)) {
        throw std::invalid_argument("check_equivariance: architecture has scalar output; use "
                                    "check_invariance");
    }
    const bool want_position = variant == EquivarianceVariant::position;
    const bool is_position = arch == Architecture::ino_vector_position;
    if (want_position != is_position) {
        throw std::invalid_argument("check_equivariance: variant does not match the architecture");
    }
    return check_deviation(params, cloud, f, trials, seed, translate_C, rotate_C);
}

void SweepSpec::validate() const {
    if (ranges.empty()) return;  // empty sweep is legal; emits a header-only table
    double prev = -1.0;
    for (double c : ranges) {
        if (c < 0.0) throw std::invalid_argument("SweepSpec: ranges must be >= 0");
        if (c < prev) throw std::invalid_argument("SweepSpec: ranges must be ascending");
        prev = c;
    }
    if (trials == 0) throw std::invalid_argument("SweepSpec: trials must be positive");
}

SweepResult transform_sweep(const ModelParams& params, const Dataset& ds, const SweepSpec& spec) {
    spec.validate();
    const auto& test = ds.test_idx;
    if (test.empty()) throw std::invalid_argument("transform_sweep: empty test split");

    SweepResult result;
    result.mode = spec.mode;
    for (std::size_t ci = 0; ci < spec.ranges.size(); ++ci) {
        const double C = spec.ranges[ci];
        SweepPoint point;
        point.range = C;
        for (std::size_t trial = 0; trial < spec.trials; ++trial) {
            Rng rng(Rng::derive(spec.seed, ci * 1000003 + trial));
            double s = 0.0;
            for (std::size_t idx : test) {
                const FrameTransform t = random_transform(C, spec.mode, rng);
                auto [cloud, sample] =
                    apply_transform(ds.cloud_of(idx), FunctionSample{ds.f[idx], ds.u[idx]}, t, ds.layout);
                s += relative_l2(forward(params, cloud, sample.f), sample.u);
            }
            point.trial_errors.push_back(s / static_cast<double>(test.size()));
        }
        double mean = 0.0;
        for (double e : point.trial_errors) mean += e;
        point.mean_error = mean / static_cast<double>(point.trial_errors.size());
        result.points.push_back(std::move(point));
    }
    return result;
}

ResolutionTransfer resolution_transfer(const ModelParams& params, const Dataset& original,
                                       const Dataset& other) {
    if (original.layout.f_width() != other.layout.f_width() ||
        original.layout.u_width() != other.layout.u_width()) {
        throw std::invalid_argument("resolution_transfer: datasets have incompatible channel layouts");
    }
    ResolutionTransfer rt;
    rt.error_original = evaluate(params, original, Split::test);
    rt.error_other = evaluate(params, other, Split::test);
    return rt;
}

GradCheckReport model_grad_check(const OperatorConfig& config, std::uint64_t seed, double tolerance,
                                 double fd_step) {
    config.validate();
    const PointCloud cloud = make_grid(2, 2, Rect{0.0, 0.0, 1.0, 1.0});
    const std::size_t m = cloud.num_nodes();

    Rng rng(Rng::derive(seed, 0x6763));
    Tensor f({m, config.layout.f_width()});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(-1.0, 1.0);
    Tensor target({m, config.output_width()});
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = rng.uniform(-1.0, 1.0);

    const ModelParams reference = init_params(config, seed);

    auto as_model = [&](const std::vector<Tensor>& tensors) {
        ModelParams mp = reference;
        mp.tensors = tensors;
        return mp;
    };

    GradCheckProblem problem;
    problem.loss = [&](const std::vector<Tensor>& tensors) {
        const ModelParams mp = as_model(tensors);
        const Tensor out = forward(mp, cloud, f);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out[i] - target[i];
            s += d * d;
        }
        return std::sqrt(s);
    };
    problem.gradients = [&](const std::vector<Tensor>& tensors) {
        const ModelParams mp = as_model(tensors);
        const SampleCache cache = build_cache(mp.config, cloud, f);
        Graph graph;
        TapeModel tm = bind_tape(graph, mp);
        const Graph::NodeId pred = forward_tape(graph, tm, cloud, f, cache);
        const Graph::NodeId loss = graph.l2norm(graph.sub(pred, graph.input(target)));
        auto grads = graph.backward(loss);
        std::vector<Tensor> out;
        out.reserve(tm.param_ids.size());
        for (Graph::NodeId id : tm.param_ids) out.push_back(std::move(grads.at(id)));
        return out;
    };

    return grad_check(problem, reference.names, reference.tensors, tolerance, fd_step);
}

namespace {

json sweep_to_json(const SweepResult& s) {
    json j;
    j["mode"] = s.mode == TransformMode::rotate ? "rotate" : "translate";
    json points = json::array();
    for (const SweepPoint& p : s.points) {
        points.push_back(json{{"range", p.range}, {"trial_errors", p.trial_errors}, {"mean", p.mean_error}});
    }
    j["points"] = std::move(points);
    return j;
}

SweepResult sweep_from_json(const json& j) {
    SweepResult s;
    s.mode = j.at("mode").get<std::string>() == "rotate" ? TransformMode::rotate : TransformMode::translate;
    for (const auto& pj : j.at("points")) {
        SweepPoint p;
        p.range = pj.at("range").get<double>();
        p.trial_errors = pj.at("trial_errors").get<std::vector<double>>();
        p.mean_error = pj.at("mean").get<double>();
        s.points.push_back(std::move(p));
    }
    return s;
}

json report_to_json_obj(const EvalReport& r) {
    json j;
    j["checkpoint"] = r.checkpoint_id;
    j["dataset"] = r.dataset_id;
    j["seed"] = r.seed;
    if (r.mean_test_error) j["mean_test_error"] = *r.mean_test_error;
    if (!r.checks.empty()) j["checks"] = r.checks;
    if (r.sweep) j["sweep"] = sweep_to_json(*r.sweep);
    if (r.resolution) {
        j["resolution_transfer"] =
            json{{"original", r.resolution->error_original}, {"other", r.resolution->error_other}};
    }
    return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report) { return report_to_json_obj(report).dump(2); }

EvalReport report_from_json(const std::string& text) {
    const json j = json::parse(text);
    EvalReport r;
    r.checkpoint_id = j.at("checkpoint").get<std::string>();
    r.dataset_id = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mean_test_error")) r.mean_test_error = j.at("mean_test_error").get<double>();
    if (j.contains("checks")) r.checks = j.at("checks").get<std::map<std::string, double>>();
    if (j.contains("sweep")) r.sweep = sweep_from_json(j.at("sweep"));
    if (j.contains("resolution_transfer")) {
        ResolutionTransfer rt;
        rt.error_original = j.at("resolution_transfer").at("original").get<double>();
        rt.error_other = j.at("resolution_transfer").at("other").get<double>();
        r.resolution = rt;
    }
    return r;
}

bool reports_equal(const EvalReport& a, const EvalReport& b) {
    return report_to_json_obj(a) == report_to_json_obj(b);
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "report.json");
        if (!os) throw std::runtime_error("emit_report: cannot write " + (dir / "report.json").string());
        os << report_to_json(report) << "\n";
    }
    {
        std::ofstream os(dir / "report.csv");
        if (!os) throw std::runtime_error("emit_report: cannot write " + (dir / "report.csv").string());
        os << "mode,range,trial,error\n";
        if (report.sweep) {
            const char* mode = report.sweep->mode == TransformMode::rotate ? "rotate" : "translate";
            for (const SweepPoint& p : report.sweep->points) {
                for (std::size_t t = 0; t < p.trial_errors.size(); ++t) {
                    char line[160];
                    std::snprintf(line, sizeof(line), "%s,%.17g,%zu,%.17g\n", mode, p.range, t,
                                  p.trial_errors[t]);
                    os << line;
                }
            }
        }
    }
}

}  // namespace ino
