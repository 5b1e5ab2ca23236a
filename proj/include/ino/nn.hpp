#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ino/rng.hpp"
#include "ino/tape.hpp"
#include "ino/tensor.hpp"

namespace ino {

enum class Activation : std::uint8_t { identity, relu };

/// Plain multilayer perceptron parameters. Layer i maps width_i -> width_{i+1}
/// as x @ W_i + b_i followed by its activation.
struct MlpParams {
    std::vector<Tensor> weights;           // (in_i, out_i)
    std::vector<Tensor> biases;            // (out_i,)
    std::vector<Activation> activations;   // one per layer

    /// ReLU on hidden layers, identity on the final layer unless final_relu.
    static MlpParams init(std::span<const std::size_t> widths, Rng& rng, bool final_relu = false);

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_width() const;
    std::size_t output_width() const;
    void validate() const;
};

Tensor mlp_forward(const MlpParams& p, const Tensor& x);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    AdamConfig cfg;
    std::int64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

AdamState make_adam(const AdamConfig& cfg, std::span<const Tensor> params);

/// One bias-corrected Adam update, in place. Shapes must match the state.
void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads);

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> groups;
    double tolerance = 0.0;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct GradCheckProblem {
    std::function<double(const std::vector<Tensor>&)> loss;
    std::function<std::vector<Tensor>(const std::vector<Tensor>&)> gradients;
};

/// Compares the problem's gradients against central finite differences of its
/// loss, group by group. Never throws on mismatch; the report carries it.
GradCheckReport grad_check(const GradCheckProblem& problem, const std::vector<std::string>& names,
                           std::vector<Tensor> params, double tolerance, double fd_step = 1e-6);

}  // namespace ino
