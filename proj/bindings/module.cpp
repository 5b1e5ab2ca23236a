#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ino/checkpoint.hpp"
#include "ino/darcy.hpp"
#include "ino/dataset.hpp"
#include "ino/evaluation.hpp"
#include "ino/lps.hpp"
#include "ino/training.hpp"

namespace py = pybind11;
using namespace ino;

namespace {

py::array_t<double> tensor_to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    if (shape.empty()) shape.push_back(0);
    py::array_t<double> out(shape);
    std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(double));
    return out;
}

Tensor numpy_to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = a.shape(i);
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor(std::move(shape), std::move(data));
}

ChannelLayout layout_from_lists(const std::vector<std::string>& f, const std::vector<std::string>& u) {
    auto parse = [](const std::vector<std::string>& names) {
        std::vector<ChannelKind> out;
        for (const auto& n : names) {
            if (n == "scalar") {
                out.push_back(ChannelKind::scalar);
            } else if (n == "vector2") {
                out.push_back(ChannelKind::vector2);
            } else {
                throw std::invalid_argument("channel kind must be 'scalar' or 'vector2', got '" + n + "'");
            }
        }
        return out;
    };
    ChannelLayout layout;
    layout.f_groups = parse(f);
    layout.u_groups = parse(u);
    return layout;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Invariant neural operators: momentum-conserving operator learning on point clouds";

    py::class_<PointCloud>(m, "PointCloud")
        .def_property_readonly("coords", [](const PointCloud& c) { return tensor_to_numpy(c.coords); })
        .def_property_readonly("quad_weights",
                               [](const PointCloud& c) { return py::cast(c.quad_weights); })
        .def_property_readonly("ref_edge", [](const PointCloud& c) { return c.ref_edge; })
        .def_property_readonly("regions",
                               [](const PointCloud& c) {
                                   std::vector<int> out;
                                   out.reserve(c.region.size());
                                   for (Region r : c.region) out.push_back(static_cast<int>(r));
                                   return out;
                               })
        .def("num_nodes", &PointCloud::num_nodes);

    py::class_<FrameTransform>(m, "FrameTransform")
        .def(py::init<>())
        .def_static("rotation", &FrameTransform::rotation, py::arg("theta"))
        .def_static("translation", &FrameTransform::translation, py::arg("gx"), py::arg("gy"))
        .def_readwrite("r", &FrameTransform::r)
        .def_readwrite("g", &FrameTransform::g)
        .def("det", &FrameTransform::det);
    m.def("compose", &compose, py::arg("second"), py::arg("first"));

    m.def(
        "make_grid",
        [](std::size_t rows, std::size_t cols, double x0, double y0, double x1, double y1) {
            return make_grid(rows, cols, Rect{x0, y0, x1, y1});
        },
        py::arg("rows"), py::arg("cols"), py::arg("x0") = 0.0, py::arg("y0") = 0.0, py::arg("x1") = 1.0,
        py::arg("y1") = 1.0);
    m.def("make_disk",
          py::overload_cast<double, double, double, double>(&make_disk), py::arg("spacing"),
          py::arg("omega_radius"), py::arg("b_radius"), py::arg("bb_radius"));
    m.def("make_disk", py::overload_cast<double, double>(&make_disk), py::arg("spacing"), py::arg("radius"));
    m.def("signed_angle", [](std::array<double, 2> v, std::array<double, 2> ref) {
        return signed_angle(v, ref);
    });
    m.def("invariant_edge_features", &invariant_edge_features, py::arg("cloud"), py::arg("i"), py::arg("j"));
    m.def(
        "random_transform",
        [](double C, const std::string& mode, std::uint64_t seed) {
            Rng rng(seed);
            return random_transform(C, mode == "rotate" ? TransformMode::rotate : TransformMode::translate,
                                    rng);
        },
        py::arg("C"), py::arg("mode"), py::arg("seed"));
    m.def(
        "apply_transform",
        [](const PointCloud& cloud, py::array_t<double> f, py::object u, const FrameTransform& t,
           const std::vector<std::string>& f_groups, const std::vector<std::string>& u_groups) {
            FunctionSample s;
            s.f = numpy_to_tensor(f);
            if (!u.is_none()) s.u = numpy_to_tensor(u.cast<py::array_t<double>>());
            auto [moved, fs] = apply_transform(cloud, s, t, layout_from_lists(f_groups, u_groups));
            py::object u_out = fs.u.size() ? py::object(tensor_to_numpy(fs.u)) : py::none();
            return py::make_tuple(moved, tensor_to_numpy(fs.f), u_out);
        },
        py::arg("cloud"), py::arg("f"), py::arg("u"), py::arg("transform"), py::arg("f_groups"),
        py::arg("u_groups"));

    py::class_<OperatorConfig>(m, "OperatorConfig")
        .def_static(
            "desk",
            [](const std::string& arch, const std::vector<std::string>& f_groups,
               const std::vector<std::string>& u_groups) {
                return OperatorConfig::desk(architecture_from_name(arch),
                                            layout_from_lists(f_groups, u_groups));
            },
            py::arg("arch"), py::arg("f_groups") = std::vector<std::string>{"scalar"},
            py::arg("u_groups") = std::vector<std::string>{"scalar"})
        .def_static(
            "paper",
            [](const std::string& arch, const std::vector<std::string>& f_groups,
               const std::vector<std::string>& u_groups) {
                return OperatorConfig::paper(architecture_from_name(arch),
                                             layout_from_lists(f_groups, u_groups));
            },
            py::arg("arch"), py::arg("f_groups") = std::vector<std::string>{"scalar"},
            py::arg("u_groups") = std::vector<std::string>{"scalar"})
        .def_property_readonly("arch",
                               [](const OperatorConfig& c) { return std::string(architecture_name(c.arch)); })
        .def_readwrite("layers", &OperatorConfig::layers)
        .def_readwrite("tau", &OperatorConfig::tau)
        .def_readwrite("hidden_dim", &OperatorConfig::hidden_dim)
        .def_readwrite("kernel_hidden", &OperatorConfig::kernel_hidden)
        .def_readwrite("radius", &OperatorConfig::radius)
        .def("kernel_input_width", &OperatorConfig::kernel_input_width)
        .def("validate", &OperatorConfig::validate);

    py::class_<ModelParams>(m, "ModelParams")
        .def_property_readonly("config", [](const ModelParams& p) { return p.config; })
        .def_property_readonly("names", [](const ModelParams& p) { return p.names; })
        .def("tensor", [](const ModelParams& p, const std::string& name) {
            return tensor_to_numpy(p.find(name));
        })
        .def("total_size", &ModelParams::total_size);

    m.def("init_params",
          static_cast<ModelParams (*)(const OperatorConfig&, std::uint64_t)>(&init_params),
          py::arg("config"), py::arg("seed"));
    m.def("init_params_for_data", &init_params_for_data, py::arg("config"), py::arg("seed"),
          py::arg("dataset"));
    m.def(
        "forward",
        [](const ModelParams& params, const PointCloud& cloud, py::array_t<double> f) {
            return tensor_to_numpy(forward(params, cloud, numpy_to_tensor(f)));
        },
        py::arg("params"), py::arg("cloud"), py::arg("f"));
    m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("dir"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("dir"));

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("problem", [](const Dataset& d) { return d.problem; })
        .def("num_samples", &Dataset::num_samples)
        .def_property_readonly("train_idx", [](const Dataset& d) { return d.train_idx; })
        .def_property_readonly("val_idx", [](const Dataset& d) { return d.val_idx; })
        .def_property_readonly("test_idx", [](const Dataset& d) { return d.test_idx; })
        .def("cloud", [](const Dataset& d, std::size_t i) { return d.cloud_of(i); }, py::arg("i") = 0)
        .def("f", [](const Dataset& d, std::size_t i) { return tensor_to_numpy(d.f.at(i)); })
        .def("u", [](const Dataset& d, std::size_t i) { return tensor_to_numpy(d.u.at(i)); });

    m.def("dataset_read", &dataset_read, py::arg("path"));
    m.def("dataset_write", &dataset_write, py::arg("dataset"), py::arg("path"));

    py::class_<DarcyConfig>(m, "DarcyConfig")
        .def(py::init<>())
        .def_readwrite("fine_n", &DarcyConfig::fine_n)
        .def_readwrite("resolutions", &DarcyConfig::resolutions)
        .def_readwrite("v_high", &DarcyConfig::v_high)
        .def_readwrite("v_low", &DarcyConfig::v_low)
        .def_readwrite("correlation", &DarcyConfig::correlation)
        .def_readwrite("n_train", &DarcyConfig::n_train)
        .def_readwrite("n_val", &DarcyConfig::n_val)
        .def_readwrite("n_test", &DarcyConfig::n_test)
        .def_readwrite("seed", &DarcyConfig::seed);
    m.def("generate_darcy_dataset", &generate_darcy_dataset, py::arg("config"));
    m.def(
        "solve_darcy",
        [](py::array_t<double> conductivity, double tol) {
            return tensor_to_numpy(solve_darcy(numpy_to_tensor(conductivity), tol));
        },
        py::arg("conductivity"), py::arg("tol") = 1e-10);

    py::class_<LpsMaterial>(m, "LpsMaterial")
        .def(py::init([](double lg, double mg, double lc, double mc) {
                 return LpsMaterial{lg, mg, lc, mc};
             }),
             py::arg("lambda_glass"), py::arg("mu_glass"), py::arg("lambda_crystal"),
             py::arg("mu_crystal"));
    py::class_<LpsConfig>(m, "LpsConfig")
        .def(py::init<>())
        .def_readwrite("horizon", &LpsConfig::horizon)
        .def_readwrite("spacing", &LpsConfig::spacing)
        .def_readwrite("material", &LpsConfig::material)
        .def_readwrite("crystal_fraction", &LpsConfig::crystal_fraction)
        .def_readwrite("n_train", &LpsConfig::n_train)
        .def_readwrite("n_val", &LpsConfig::n_val)
        .def_readwrite("n_test", &LpsConfig::n_test)
        .def_readwrite("seed", &LpsConfig::seed);
    m.def("generate_lps_dataset", &generate_lps_dataset, py::arg("config"));

    py::class_<AugmentSpec>(m, "AugmentSpec")
        .def(py::init([](std::size_t count, double translate, double rotate) {
                 return AugmentSpec{count, translate, rotate};
             }),
             py::arg("count") = 0, py::arg("translate") = 0.0, py::arg("rotate") = 0.0);
    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("decay", &TrainConfig::decay)
        .def_readwrite("decay_interval", &TrainConfig::decay_interval)
        .def_readwrite("reg", &TrainConfig::reg)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("augment", &TrainConfig::augment);
    py::class_<TrainReport>(m, "TrainReport")
        .def_property_readonly("train_loss", [](const TrainReport& r) { return r.train_loss; })
        .def_property_readonly("best_epoch", [](const TrainReport& r) { return r.best_epoch; })
        .def_property_readonly("best_val_error", [](const TrainReport& r) { return r.best_val_error; })
        .def_property_readonly("diverged", [](const TrainReport& r) { return r.diverged; })
        .def("epochs", &TrainReport::epochs)
        .def("to_json", &TrainReport::to_json);

    m.def("fit", &fit, py::arg("config"), py::arg("params"), py::arg("dataset"));
    m.def(
        "grid_search",
        [](const OperatorConfig& cfg, const Dataset& ds, const TrainConfig& base, std::vector<double> lrs,
           std::vector<double> decays, std::vector<double> regs) {
            const GridSearchResult r = grid_search(cfg, ds, base, lrs, decays, regs);
            py::list tried;
            for (const auto& e : r.tried) {
                tried.append(py::make_tuple(e.lr, e.decay, e.reg, e.val_error));
            }
            py::dict out;
            out["best"] = py::make_tuple(r.best.lr, r.best.decay, r.best.reg, r.best.val_error);
            out["tried"] = tried;
            return out;
        },
        py::arg("config"), py::arg("dataset"), py::arg("base"), py::arg("lrs"), py::arg("decays"),
        py::arg("regs"));
    m.def("shallow_to_deep", &shallow_to_deep, py::arg("trained"), py::arg("new_layers"));
    m.def("augment", &augment, py::arg("dataset"), py::arg("spec"), py::arg("seed"));
    m.def(
        "relative_l2",
        [](py::array_t<double> pred, py::array_t<double> truth) {
            return relative_l2(numpy_to_tensor(pred), numpy_to_tensor(truth));
        },
        py::arg("pred"), py::arg("truth"));

    m.def(
        "evaluate",
        [](const ModelParams& params, const Dataset& ds, const std::string& split) {
            Split s = split == "train" ? Split::train : (split == "val" ? Split::val : Split::test);
            return evaluate(params, ds, s);
        },
        py::arg("params"), py::arg("dataset"), py::arg("split") = "test");
    m.def(
        "check_invariance",
        [](const ModelParams& params, const PointCloud& cloud, py::array_t<double> f, std::size_t trials,
           std::uint64_t seed) { return check_invariance(params, cloud, numpy_to_tensor(f), trials, seed); },
        py::arg("params"), py::arg("cloud"), py::arg("f"), py::arg("trials") = 10, py::arg("seed") = 0);
    m.def(
        "check_equivariance",
        [](const ModelParams& params, const PointCloud& cloud, py::array_t<double> f, std::size_t trials,
           std::uint64_t seed, const std::string& variant) {
            return check_equivariance(params, cloud, numpy_to_tensor(f), trials, seed,
                                      variant == "position" ? EquivarianceVariant::position
                                                            : EquivarianceVariant::displacement);
        },
        py::arg("params"), py::arg("cloud"), py::arg("f"), py::arg("trials") = 10, py::arg("seed") = 0,
        py::arg("variant") = "displacement");
    m.def(
        "transform_sweep",
        [](const ModelParams& params, const Dataset& ds, const std::string& mode, std::vector<double> Cs,
           std::size_t trials, std::uint64_t seed) {
            SweepSpec spec;
            spec.mode = mode == "rotate" ? TransformMode::rotate : TransformMode::translate;
            spec.ranges = std::move(Cs);
            spec.trials = trials;
            spec.seed = seed;
            const SweepResult r = transform_sweep(params, ds, spec);
            py::list out;
            for (const SweepPoint& p : r.points) {
                out.append(py::make_tuple(p.range, p.mean_error, p.trial_errors));
            }
            return out;
        },
        py::arg("params"), py::arg("dataset"), py::arg("mode"), py::arg("ranges"), py::arg("trials") = 1,
        py::arg("seed") = 0);
    m.def(
        "model_grad_check",
        [](const OperatorConfig& config, std::uint64_t seed, double tol) {
            const GradCheckReport r = model_grad_check(config, seed, tol);
            py::dict out;
            out["pass"] = r.pass;
            out["max_rel_err"] = r.max_rel_err;
            py::dict groups;
            for (const auto& g : r.groups) groups[py::str(g.name)] = g.max_rel_err;
            out["groups"] = groups;
            return out;
        },
        py::arg("config"), py::arg("seed") = 0, py::arg("tol") = 1e-6);
}
