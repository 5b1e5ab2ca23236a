#include "ino/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "ino/engine.hpp"
#include "ino/tensor_ops.hpp"

namespace ino {

MlpParams MlpParams::init(std::span<const std::size_t> widths, Rng& rng, bool final_relu) {
    if (widths.size() < 2) throw std::invalid_argument("MlpParams::init: need at least two widths");
    MlpParams p;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Tensor w({in, out});
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
        Tensor b({out});
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
        const bool last = (l + 2 == widths.size());
        p.activations.push_back(last && !final_relu ? Activation::identity : Activation::relu);
    }
    return p;
}

std::size_t MlpParams::input_width() const {
    if (weights.empty()) throw std::invalid_argument("MlpParams: empty");
    return weights.front().rows();
}

std::size_t MlpParams::output_width() const {
    if (weights.empty()) throw std::invalid_argument("MlpParams: empty");
    return weights.back().cols();
}

void MlpParams::validate() const {
    if (weights.size() != biases.size() || weights.size() != activations.size() || weights.empty()) {
        throw std::invalid_argument("MlpParams: inconsistent layer counts");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].cols()) {
            throw std::invalid_argument("MlpParams: bias width mismatch at layer " + std::to_string(l));
        }
        if (l + 1 < weights.size() && weights[l].cols() != weights[l + 1].rows()) {
            throw std::invalid_argument("MlpParams: layer widths do not chain at layer " + std::to_string(l));
        }
    }
}

Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
    p.validate();
    if (x.ndim() != 2 || x.cols() != p.input_width()) {
        throw std::invalid_argument("mlp_forward: input " + x.shape_str() + " does not match width " +
                                    std::to_string(p.input_width()));
    }
    EagerEngine eng;
    std::vector<std::pair<Tensor, Tensor>> layers;
    layers.reserve(p.num_layers());
    for (std::size_t l = 0; l < p.num_layers(); ++l) layers.emplace_back(p.weights[l], p.biases[l]);
    return mlp_apply(eng, std::span<const std::pair<Tensor, Tensor>>(layers), x, p.activations);
}

AdamState make_adam(const AdamConfig& cfg, std::span<const Tensor> params) {
    AdamState st;
    st.cfg = cfg;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Tensor& p : params) {
        st.m.emplace_back(p.shape());
        st.v.emplace_back(p.shape());
    }
    return st;
}

void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (params.size() != state.m.size() || grads.size() != params.size()) {
        throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    }
    state.step += 1;
    const AdamConfig& c = state.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        const Tensor& g = grads[k];
        if (!p.same_shape(g) || !p.same_shape(state.m[k])) {
            throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(k) +
                                        ": param " + p.shape_str() + " vs grad " + g.shape_str());
        }
        double* pm = state.m[k].data();
        double* pv = state.v[k].data();
        double* pp = p.data();
        const double* pg = g.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = pg[i] + c.weight_decay * pp[i];
            pm[i] = c.beta1 * pm[i] + (1.0 - c.beta1) * gi;
            pv[i] = c.beta2 * pv[i] + (1.0 - c.beta2) * gi * gi;
            const double mhat = pm[i] / bc1;
            const double vhat = pv[i] / bc2;
            pp[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

GradCheckReport grad_check(const GradCheckProblem& problem, const std::vector<std::string>& names,
                           std::vector<Tensor> params, double tolerance, double fd_step) {
    if (names.size() != params.size()) {
        throw std::invalid_argument("grad_check: name/parameter count mismatch");
    }
    GradCheckReport report;
    report.tolerance = tolerance;

    const std::vector<Tensor> analytic = problem.gradients(params);
    if (analytic.size() != params.size()) {
        throw std::invalid_argument("grad_check: gradient count mismatch");
    }

    for (std::size_t k = 0; k < params.size(); ++k) {
        GradCheckEntry entry;
        entry.name = names[k];
        for (std::size_t i = 0; i < params[k].size(); ++i) {
            const double orig = params[k][i];
            params[k][i] = orig + fd_step;
            const double fp = problem.loss(params);
            params[k][i] = orig - fd_step;
            const double fm = problem.loss(params);
            params[k][i] = orig;
            const double fd = (fp - fm) / (2.0 * fd_step);
            const double an = analytic[k][i];
            const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
            entry.max_rel_err = std::max(entry.max_rel_err, std::abs(fd - an) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        if (entry.max_rel_err > tolerance) report.pass = false;
        report.groups.push_back(std::move(entry));
    }
    return report;
}

}  // namespace ino
