#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "ino/geometry.hpp"
#include "ino/nn.hpp"
#include "ino/pairs.hpp"
#include "ino/tape.hpp"
#include "ino/tensor.hpp"

namespace ino {

enum class Architecture : std::uint8_t {
    gno,                  // plain layer update, frame-dependent kernel arguments
    ino_scalar,           // residual update, invariant kernel, MLP projection
    ino_vector,           // residual update, coordinate head, displacement output
    ino_vector_position,  // as ino_vector but outputs the updated positions
    norm_ino,             // ino_scalar with edge length as the only edge argument
};

std::string_view architecture_name(Architecture arch);
Architecture architecture_from_name(std::string_view name);

bool is_vector_output(Architecture arch);
bool uses_residual_update(Architecture arch);
bool uses_invariant_features(Architecture arch);

struct OperatorConfig {
    Architecture arch = Architecture::ino_scalar;
    std::size_t layers = 4;                          // L
    double tau = 0.0;                                // 0 means 1/L
    std::size_t hidden_dim = 64;                     // d_h
    std::vector<std::size_t> kernel_hidden = {512, 1024};
    std::vector<std::size_t> phi_hidden = {};        // empty means {d_h}
    ChannelLayout layout = ChannelLayout::scalar_to_scalar();
    double radius = std::numeric_limits<double>::infinity();  // integration ball; inf = whole domain

    double effective_tau() const { return tau > 0.0 ? tau : 1.0 / static_cast<double>(layers); }
    std::vector<std::size_t> effective_phi_hidden() const {
        return phi_hidden.empty() ? std::vector<std::size_t>{hidden_dim} : phi_hidden;
    }

    /// Number of kernel arguments n for this architecture and layout.
    std::size_t kernel_input_width() const;
    /// Width of the lifting input (raw coords+channels for gno, invariants otherwise).
    std::size_t lift_input_width() const;
    std::size_t output_width() const;

    void validate() const;

    /// Reduced widths that train in minutes on a workstation.
    static OperatorConfig desk(Architecture arch, ChannelLayout layout);
    /// Widths as used in the reference experiments (d_h = 64, kernel 512/1024).
    static OperatorConfig paper(Architecture arch, ChannelLayout layout);
};

/// All trainable tensors plus the architecture they parameterize. A single
/// (W, c, kernel, phi) set is shared by every layer.
struct ModelParams {
    OperatorConfig config;
    std::uint64_t init_seed = 0;
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    Tensor& find(std::string_view name);
    const Tensor& find(std::string_view name) const;
    std::size_t total_size() const;
};

/// Per-column magnitude scales used to condition the initialization: rows of
/// the input-facing weight matrices are divided by the matching scale and the
/// output head is multiplied by the target magnitude, so the freshly drawn
/// model sees O(1) activations regardless of the data's physical units.
struct InitScales {
    std::vector<double> lift_in;
    std::vector<double> kernel_in;
    double output = 1.0;
};

ModelParams init_params(const OperatorConfig& config, std::uint64_t seed);
ModelParams init_params(const OperatorConfig& config, std::uint64_t seed, const InitScales& scales);

/// Feature function h (M x d_h) and, for the vector architectures, the
/// coordinate function x (M x 2).
struct LayerState {
    Tensor h;
    Tensor xcoord;
};

/// Kernel features of every integration pair, deduplicated: `features` holds
/// the distinct rows, and pairs.feature_row maps each pair to its row.
struct SampleCache {
    PairTable pairs;
    Tensor features;  // U x n
};

/// Per-pair kernel arguments for one (i, j); row content depends on arch.
std::vector<double> kernel_features(const OperatorConfig& config, const PointCloud& cloud, const Tensor& f,
                                    std::size_t i, std::size_t j);

/// Per-node frame-invariant channel features (norm per vector2 group, raw
/// value per scalar group), M x G.
Tensor invariant_node_features(const ChannelLayout& layout, const Tensor& f);

SampleCache build_cache(const OperatorConfig& config, const PointCloud& cloud, const Tensor& f,
                        bool dedup = true);

LayerState lift(const ModelParams& params, const PointCloud& cloud, const Tensor& f);
LayerState integral_layer_scalar(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                                 const LayerState& state);
LayerState integral_layer_vector(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                                 const LayerState& state);
Tensor project(const ModelParams& params, const PointCloud& cloud, const LayerState& state);

/// Full forward pass, plain tensors (no tape).
Tensor forward(const ModelParams& params, const PointCloud& cloud, const Tensor& f);
Tensor forward(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
               const SampleCache& cache);

/// Parameters registered on a tape; param_ids is aligned with ModelParams.
struct TapeModel {
    const ModelParams* params = nullptr;
    std::vector<Graph::NodeId> param_ids;
};

TapeModel bind_tape(Graph& graph, const ModelParams& params);
Graph::NodeId forward_tape(Graph& graph, const TapeModel& model, const PointCloud& cloud, const Tensor& f,
                           const SampleCache& cache);

}  // namespace ino
