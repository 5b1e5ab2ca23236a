#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "ino/pairs.hpp"
#include "ino/tensor.hpp"

namespace ino {

/// Reverse-mode tape. Operations are recorded in construction order, which is
/// topological by construction; backward() walks them in exact reverse order.
/// Referenced PairTables and index vectors must outlive the graph.
class Graph {
public:
    using NodeId = std::int32_t;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    NodeId input(Tensor value, bool requires_grad = false);

    NodeId matmul(NodeId a, NodeId b);
    NodeId affine(NodeId x, NodeId w, NodeId bias);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double s);
    NodeId add_rowvec(NodeId x, NodeId bias);
    NodeId relu(NodeId x);
    NodeId sum_all(NodeId x);
    NodeId l2norm(NodeId x);
    NodeId row_l2norm(NodeId x);
    NodeId concat_cols(std::span<const NodeId> parts);
    NodeId slice_cols(NodeId x, std::size_t lo, std::size_t hi);
    NodeId gather_rows(NodeId x, std::span<const std::int32_t> idx);
    NodeId pair_messages(NodeId m_rows, NodeId h, const PairTable& pairs);
    NodeId pair_weighted_sum(NodeId msgs, const PairTable& pairs);
    NodeId pair_coord_sum(NodeId phi, const PairTable& pairs);

    const Tensor& value(NodeId id) const;
    std::size_t num_nodes() const { return nodes_.size(); }

    /// Gradients of a scalar loss with respect to every requires_grad input.
    /// Inputs that do not influence the loss map to zero tensors.
    std::unordered_map<NodeId, Tensor> backward(NodeId loss);

private:
    enum class Op : std::uint8_t {
        input,
        matmul,
        affine,
        add,
        sub,
        mul,
        scale,
        add_rowvec,
        relu,
        sum_all,
        l2norm,
        row_l2norm,
        concat_cols,
        slice_cols,
        gather_rows,
        pair_messages,
        pair_weighted_sum,
        pair_coord_sum,
    };

    struct Node {
        Op op = Op::input;
        NodeId a = -1;
        NodeId b = -1;
        NodeId c = -1;
        std::vector<NodeId> many;
        double factor = 0.0;
        std::size_t lo = 0, hi = 0;
        const PairTable* pairs = nullptr;
        std::span<const std::int32_t> idx;
        Tensor value;
        bool needs_grad = false;
    };

    NodeId push(Node node);
    bool needs(NodeId id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }
    void check_id(NodeId id, const char* where) const;

    std::vector<Node> nodes_;
    std::vector<NodeId> grad_inputs_;
};

}  // namespace ino
