#include "ino/operators.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "ino/engine.hpp"

namespace ino {

std::string_view architecture_name(Architecture arch) {
    switch (arch) {
        case Architecture::gno: return "gno";
        case Architecture::ino_scalar: return "ino-scalar";
        case Architecture::ino_vector: return "ino-vector";
        case Architecture::ino_vector_position: return "ino-vector-position";
        case Architecture::norm_ino: return "norm-ino";
    }
    throw std::logic_error("architecture_name: unknown architecture");
}

Architecture architecture_from_name(std::string_view name) {
    if (name == "gno") return Architecture::gno;
    if (name == "ino-scalar") return Architecture::ino_scalar;
    if (name == "ino-vector") return Architecture::ino_vector;
    if (name == "ino-vector-position") return Architecture::ino_vector_position;
    if (name == "norm-ino") return Architecture::norm_ino;
    throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

bool is_vector_output(Architecture arch) {
    return arch == Architecture::ino_vector || arch == Architecture::ino_vector_position;
}

bool uses_residual_update(Architecture arch) { return arch != Architecture::gno; }

bool uses_invariant_features(Architecture arch) { return arch != Architecture::gno; }

std::size_t OperatorConfig::kernel_input_width() const {
    const std::size_t groups = layout.f_groups.size();
    switch (arch) {
        case Architecture::gno: return 4 + 2 * layout.f_width();
        case Architecture::norm_ino: return 1 + 2 * groups;
        default: return 2 + 2 * groups;
    }
}

std::size_t OperatorConfig::lift_input_width() const {
    if (arch == Architecture::gno) return 2 + layout.f_width();
    return layout.f_groups.size();
}

std::size_t OperatorConfig::output_width() const { return layout.u_width(); }

void OperatorConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("OperatorConfig: layer count must be >= 1");
    if (!(effective_tau() > 0.0)) throw std::invalid_argument("OperatorConfig: tau must be positive");
    if (hidden_dim < 1) throw std::invalid_argument("OperatorConfig: hidden dim must be >= 1");
    if (layout.f_groups.empty()) throw std::invalid_argument("OperatorConfig: empty input channel layout");
    if (!(radius > 0.0)) throw std::invalid_argument("OperatorConfig: integration radius must be positive");
    if (is_vector_output(arch)) {
        if (layout.u_groups.size() != 1 || layout.u_groups[0] != ChannelKind::vector2) {
            throw std::invalid_argument("OperatorConfig: vector architectures need u = one vector2 group");
        }
    } else {
        if (layout.u_groups.empty()) {
            throw std::invalid_argument("OperatorConfig: empty output channel layout");
        }
        for (ChannelKind k : layout.u_groups) {
            if (k != ChannelKind::scalar) {
                throw std::invalid_argument("OperatorConfig: scalar architectures need scalar u channels");
            }
        }
    }
}

OperatorConfig OperatorConfig::desk(Architecture arch, ChannelLayout layout) {
    OperatorConfig c;
    c.arch = arch;
    c.layers = 4;
    c.hidden_dim = 16;
    c.kernel_hidden = {32, 32};
    c.layout = std::move(layout);
    return c;
}

OperatorConfig OperatorConfig::paper(Architecture arch, ChannelLayout layout) {
    OperatorConfig c;
    c.arch = arch;
    c.layers = 4;
    c.hidden_dim = 64;
    c.kernel_hidden = {512, 1024};
    c.layout = std::move(layout);
    return c;
}

Tensor& ModelParams::find(std::string_view name) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return tensors[i];
    }
    throw std::invalid_argument("ModelParams: no parameter named '" + std::string(name) + "'");
}

const Tensor& ModelParams::find(std::string_view name) const {
    return const_cast<ModelParams*>(this)->find(name);
}

std::size_t ModelParams::total_size() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
}

namespace {

void push_affine(ModelParams& mp, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w({in, out});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    Tensor b({out});
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    mp.names.push_back(prefix + ".W");
    mp.tensors.push_back(std::move(w));
    mp.names.push_back(prefix + ".b");
    mp.tensors.push_back(std::move(b));
}

std::vector<std::size_t> kernel_widths(const OperatorConfig& c) {
    std::vector<std::size_t> w;
    w.push_back(c.kernel_input_width());
    for (std::size_t h : c.kernel_hidden) w.push_back(h);
    w.push_back(c.hidden_dim * c.hidden_dim);
    return w;
}

std::vector<std::size_t> phi_widths(const OperatorConfig& c) {
    std::vector<std::size_t> w;
    w.push_back(c.hidden_dim);
    for (std::size_t h : c.effective_phi_hidden()) w.push_back(h);
    w.push_back(1);
    return w;
}

std::vector<std::size_t> proj_widths(const OperatorConfig& c) {
    return {c.hidden_dim, 2 * c.hidden_dim, c.output_width()};
}

template <class E>
struct Bound {
    using Ref = typename E::Ref;
    Ref lift_w, lift_b, layer_w, layer_b;
    std::vector<std::pair<Ref, Ref>> kappa, phi, proj;
    std::vector<Activation> kappa_act, phi_act, proj_act;
};

// Interprets a flat ref list in ModelParams order as the per-block views.
template <class E>
Bound<E> bound_from_refs(const OperatorConfig& cfg, const std::vector<typename E::Ref>& refs) {
    Bound<E> b{};
    std::size_t k = 0;
    auto next = [&]() -> const typename E::Ref& { return refs.at(k++); };
    b.lift_w = next();
    b.lift_b = next();
    b.layer_w = next();
    b.layer_b = next();
    const std::size_t n_kappa = cfg.kernel_hidden.size() + 1;
    for (std::size_t l = 0; l < n_kappa; ++l) {
        auto& w = next();
        auto& bb = next();
        b.kappa.emplace_back(w, bb);
        b.kappa_act.push_back(l + 1 < n_kappa ? Activation::relu : Activation::identity);
    }
    if (is_vector_output(cfg.arch)) {
        const std::size_t n_phi = cfg.effective_phi_hidden().size() + 1;
        for (std::size_t l = 0; l < n_phi; ++l) {
            auto& w = next();
            auto& bb = next();
            b.phi.emplace_back(w, bb);
            b.phi_act.push_back(l + 1 < n_phi ? Activation::relu : Activation::identity);
        }
    } else {
        for (std::size_t l = 0; l < 2; ++l) {
            auto& w = next();
            auto& bb = next();
            b.proj.emplace_back(w, bb);
            b.proj_act.push_back(l + 1 < 2 ? Activation::relu : Activation::identity);
        }
    }
    if (k != refs.size()) throw std::logic_error("bound_from_refs: parameter count mismatch");
    return b;
}

template <class E>
std::vector<typename E::Ref> register_refs(E& eng, const ModelParams& mp) {
    std::vector<typename E::Ref> refs;
    refs.reserve(mp.tensors.size());
    for (const Tensor& t : mp.tensors) refs.push_back(eng.param(t));
    return refs;
}

Tensor lift_input_tensor(const OperatorConfig& config, const PointCloud& cloud, const Tensor& f) {
    if (config.arch == Architecture::gno) {
        const Tensor* parts[2] = {&cloud.coords, &f};
        return ops::concat_cols(parts);
    }
    return invariant_node_features(config.layout, f);
}

template <class E>
struct StateRefs {
    typename E::Ref h;
    std::optional<typename E::Ref> xcoord;
};

template <class E>
StateRefs<E> lift_impl(E& eng, const Bound<E>& b, const OperatorConfig& config, const PointCloud& cloud,
                       const Tensor& f) {
    StateRefs<E> st{eng.affine(eng.constant(lift_input_tensor(config, cloud, f)), b.lift_w, b.lift_b),
                    std::nullopt};
    if (is_vector_output(config.arch)) st.xcoord = eng.constant(cloud.coords);
    return st;
}

template <class E>
typename E::Ref kernel_matrix_impl(E& eng, const Bound<E>& b, const SampleCache& cache) {
    auto feats = eng.constant(cache.features);
    return mlp_apply(eng, std::span<const std::pair<typename E::Ref, typename E::Ref>>(b.kappa), feats,
                     b.kappa_act);
}

template <class E>
StateRefs<E> layer_impl(E& eng, const Bound<E>& b, const OperatorConfig& config, const SampleCache& cache,
                        const typename E::Ref& m_rows, const StateRefs<E>& st) {
    const double tau = config.effective_tau();
    auto msgs = eng.pair_messages(m_rows, st.h, cache.pairs);
    auto integral = eng.pair_weighted_sum(msgs, cache.pairs);
    auto pre = eng.add(eng.affine(st.h, b.layer_w, b.layer_b), integral);
    auto act = eng.relu(pre);
    StateRefs<E> out;
    out.h = uses_residual_update(config.arch) ? eng.add(st.h, eng.scale(act, tau)) : std::move(act);
    if (st.xcoord) {
        auto phi = mlp_apply(eng, std::span<const std::pair<typename E::Ref, typename E::Ref>>(b.phi), msgs,
                             b.phi_act);
        auto delta = eng.pair_coord_sum(phi, cache.pairs);
        out.xcoord = eng.add(*st.xcoord, eng.scale(delta, tau));
    }
    return out;
}

template <class E>
typename E::Ref project_impl(E& eng, const Bound<E>& b, const OperatorConfig& config, const PointCloud& cloud,
                             const StateRefs<E>& st) {
    switch (config.arch) {
        case Architecture::ino_vector:
            return eng.sub(*st.xcoord, eng.constant(cloud.coords));
        case Architecture::ino_vector_position:
            return *st.xcoord;
        default:
            return mlp_apply(eng, std::span<const std::pair<typename E::Ref, typename E::Ref>>(b.proj), st.h,
                             b.proj_act);
    }
}

template <class E>
typename E::Ref forward_impl(E& eng, const Bound<E>& b, const OperatorConfig& config, const PointCloud& cloud,
                             const Tensor& f, const SampleCache& cache) {
    auto st = lift_impl(eng, b, config, cloud, f);
    auto m_rows = kernel_matrix_impl(eng, b, cache);
    for (std::size_t l = 0; l < config.layers; ++l) {
        st = layer_impl(eng, b, config, cache, m_rows, st);
    }
    return project_impl(eng, b, config, cloud, st);
}

void check_sample(const ModelParams& params, const PointCloud& cloud, const Tensor& f) {
    params.config.validate();
    if (f.ndim() != 2 || f.rows() != cloud.num_nodes() || f.cols() != params.config.layout.f_width()) {
        throw std::invalid_argument("forward: f " + f.shape_str() + " does not match cloud/layout (" +
                                    std::to_string(cloud.num_nodes()) + " nodes, width " +
                                    std::to_string(params.config.layout.f_width()) + ")");
    }
}

LayerState layer_step_eager(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                            const LayerState& state, bool vector_step) {
    check_sample(params, cloud, f);
    if (state.h.ndim() != 2 || state.h.rows() != cloud.num_nodes() ||
        state.h.cols() != params.config.hidden_dim) {
        throw std::invalid_argument("integral_layer: state h " + state.h.shape_str() +
                                    " does not match cloud/d_h");
    }
    if (vector_step && state.xcoord.size() == 0) {
        throw std::invalid_argument("integral_layer_vector: state has no coordinate function");
    }
    EagerEngine eng;
    auto bound = bound_from_refs<EagerEngine>(params.config, register_refs(eng, params));
    SampleCache cache = build_cache(params.config, cloud, f);
    auto m_rows = kernel_matrix_impl(eng, bound, cache);
    StateRefs<EagerEngine> st{state.h,
                              vector_step ? std::optional<Tensor>(state.xcoord) : std::nullopt};
    auto out = layer_impl(eng, bound, params.config, cache, m_rows, st);
    LayerState result;
    result.h = std::move(out.h);
    if (out.xcoord) result.xcoord = std::move(*out.xcoord);
    if (checked_mode() && !result.h.all_finite()) {
        throw std::runtime_error("integral_layer: non-finite output in checked mode");
    }
    return result;
}

}  // namespace

ModelParams init_params(const OperatorConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams mp;
    mp.config = config;
    mp.init_seed = seed;
    Rng rng(seed);

    const std::size_t dh = config.hidden_dim;
    push_affine(mp, "lift", config.lift_input_width(), dh, rng);
    push_affine(mp, "layer", dh, dh, rng);
    {
        const auto widths = kernel_widths(config);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            push_affine(mp, "kappa" + std::to_string(l), widths[l], widths[l + 1], rng);
        }
    }
    if (is_vector_output(config.arch)) {
        const auto widths = phi_widths(config);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            push_affine(mp, "phi" + std::to_string(l), widths[l], widths[l + 1], rng);
        }
    } else {
        const auto widths = proj_widths(config);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            push_affine(mp, "Q" + std::to_string(l), widths[l], widths[l + 1], rng);
        }
    }
    return mp;
}

ModelParams init_params(const OperatorConfig& config, std::uint64_t seed, const InitScales& scales) {
    ModelParams mp = init_params(config, seed);
    if (scales.lift_in.size() != config.lift_input_width() ||
        scales.kernel_in.size() != config.kernel_input_width()) {
        throw std::invalid_argument("init_params: scale vector widths do not match the architecture");
    }
    auto scale_rows = [](Tensor& w, const std::vector<double>& s) {
        for (std::size_t r = 0; r < w.rows(); ++r) {
            const double factor = s[r] > 0.0 ? 1.0 / s[r] : 1.0;
            for (std::size_t c = 0; c < w.cols(); ++c) w.at(r, c) *= factor;
        }
    };
    scale_rows(mp.find("lift.W"), scales.lift_in);
    scale_rows(mp.find("kappa0.W"), scales.kernel_in);

    const double out = scales.output > 0.0 ? scales.output : 1.0;
    if (is_vector_output(config.arch)) {
        const std::size_t last = config.effective_phi_hidden().size();
        Tensor& w = mp.find("phi" + std::to_string(last) + ".W");
        Tensor& b = mp.find("phi" + std::to_string(last) + ".b");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] *= out;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] *= out;
    } else {
        Tensor& w = mp.find("Q1.W");
        Tensor& b = mp.find("Q1.b");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] *= out;
        for (std::size_t i = 0; i < b.size(); ++i) b[i] *= out;
    }
    return mp;
}

LayerState lift(const ModelParams& params, const PointCloud& cloud, const Tensor& f) {
    check_sample(params, cloud, f);
    EagerEngine eng;
    auto bound = bound_from_refs<EagerEngine>(params.config, register_refs(eng, params));
    auto st = lift_impl(eng, bound, params.config, cloud, f);
    LayerState out;
    out.h = std::move(st.h);
    if (st.xcoord) out.xcoord = std::move(*st.xcoord);
    return out;
}

LayerState integral_layer_scalar(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                                 const LayerState& state) {
    return layer_step_eager(params, cloud, f, state, false);
}

LayerState integral_layer_vector(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                                 const LayerState& state) {
    if (!is_vector_output(params.config.arch)) {
        throw std::invalid_argument("integral_layer_vector: architecture has no coordinate head");
    }
    return layer_step_eager(params, cloud, f, state, true);
}

Tensor project(const ModelParams& params, const PointCloud& cloud, const LayerState& state) {
    params.config.validate();
    if (is_vector_output(params.config.arch)) {
        if (state.xcoord.size() == 0) {
            throw std::invalid_argument("project: vector architecture needs a coordinate state");
        }
    } else if (state.h.ndim() != 2 || state.h.cols() != params.config.hidden_dim) {
        throw std::invalid_argument("project: state h " + state.h.shape_str() + " does not match d_h");
    }
    EagerEngine eng;
    auto bound = bound_from_refs<EagerEngine>(params.config, register_refs(eng, params));
    StateRefs<EagerEngine> st{state.h,
                              state.xcoord.size() ? std::optional<Tensor>(state.xcoord) : std::nullopt};
    return project_impl(eng, bound, params.config, cloud, st);
}

Tensor forward(const ModelParams& params, const PointCloud& cloud, const Tensor& f) {
    SampleCache cache = build_cache(params.config, cloud, f);
    return forward(params, cloud, f, cache);
}

Tensor forward(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
               const SampleCache& cache) {
    check_sample(params, cloud, f);
    EagerEngine eng;
    auto bound = bound_from_refs<EagerEngine>(params.config, register_refs(eng, params));
    Tensor out = forward_impl(eng, bound, params.config, cloud, f, cache);
    if (checked_mode() && !out.all_finite()) {
        throw std::runtime_error("forward: non-finite output in checked mode");
    }
    return out;
}

TapeModel bind_tape(Graph& graph, const ModelParams& params) {
    TapeModel tm;
    tm.params = &params;
    TapeEngine eng{&graph};
    tm.param_ids = register_refs(eng, params);
    return tm;
}

Graph::NodeId forward_tape(Graph& graph, const TapeModel& model, const PointCloud& cloud, const Tensor& f,
                           const SampleCache& cache) {
    check_sample(*model.params, cloud, f);
    TapeEngine eng{&graph};
    auto bound = bound_from_refs<TapeEngine>(model.params->config, model.param_ids);
    return forward_impl(eng, bound, model.params->config, cloud, f, cache);
}

}  // namespace ino
