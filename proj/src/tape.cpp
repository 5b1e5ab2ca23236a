#include "ino/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "ino/tensor_ops.hpp"

namespace ino {

namespace {

void accumulate(std::vector<Tensor>& grads, Graph::NodeId id, Tensor g) {
    Tensor& slot = grads[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
        slot = std::move(g);
    } else {
        double* pd = slot.data();
        const double* ps = g.data();
        for (std::size_t i = 0; i < slot.size(); ++i) pd[i] += ps[i];
    }
}

}  // namespace

void Graph::check_id(NodeId id, const char* where) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw std::invalid_argument(std::string(where) + ": invalid node id");
    }
}

Graph::NodeId Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::NodeId Graph::input(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::input;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    NodeId id = push(std::move(n));
    if (requires_grad) grad_inputs_.push_back(id);
    return id;
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
    check_id(a, "matmul");
    check_id(b, "matmul");
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.needs_grad = needs(a) || needs(b);
    n.value = ops::matmul(value(a), value(b));
    return push(std::move(n));
}

Graph::NodeId Graph::affine(NodeId x, NodeId w, NodeId bias) {
    check_id(x, "affine");
    check_id(w, "affine");
    check_id(bias, "affine");
    Node n;
    n.op = Op::affine;
    n.a = x;
    n.b = w;
    n.c = bias;
    n.needs_grad = needs(x) || needs(w) || needs(bias);
    n.value = ops::affine(value(x), value(w), value(bias));
    return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    check_id(a, "add");
    check_id(b, "add");
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.needs_grad = needs(a) || needs(b);
    n.value = ops::add(value(a), value(b));
    return push(std::move(n));
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
    check_id(a, "sub");
    check_id(b, "sub");
    Node n;
    n.op = Op::sub;
    n.a = a;
    n.b = b;
    n.needs_grad = needs(a) || needs(b);
    n.value = ops::sub(value(a), value(b));
    return push(std::move(n));
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
    check_id(a, "mul");
    check_id(b, "mul");
    Node n;
    n.op = Op::mul;
    n.a = a;
    n.b = b;
    n.needs_grad = needs(a) || needs(b);
    n.value = ops::mul(value(a), value(b));
    return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId a, double s) {
    check_id(a, "scale");
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.factor = s;
    n.needs_grad = needs(a);
    n.value = ops::scale(value(a), s);
    return push(std::move(n));
}

Graph::NodeId Graph::add_rowvec(NodeId x, NodeId bias) {
    check_id(x, "add_rowvec");
    check_id(bias, "add_rowvec");
    Node n;
    n.op = Op::add_rowvec;
    n.a = x;
    n.b = bias;
    n.needs_grad = needs(x) || needs(bias);
    n.value = ops::add_rowvec(value(x), value(bias));
    return push(std::move(n));
}

Graph::NodeId Graph::relu(NodeId x) {
    check_id(x, "relu");
    Node n;
    n.op = Op::relu;
    n.a = x;
    n.needs_grad = needs(x);
    n.value = ops::relu(value(x));
    return push(std::move(n));
}

Graph::NodeId Graph::sum_all(NodeId x) {
    check_id(x, "sum_all");
    Node n;
    n.op = Op::sum_all;
    n.a = x;
    n.needs_grad = needs(x);
    n.value = ops::sum_all(value(x));
    return push(std::move(n));
}

Graph::NodeId Graph::l2norm(NodeId x) {
    check_id(x, "l2norm");
    Node n;
    n.op = Op::l2norm;
    n.a = x;
    n.needs_grad = needs(x);
    n.value = ops::l2norm(value(x));
    return push(std::move(n));
}

Graph::NodeId Graph::row_l2norm(NodeId x) {
    check_id(x, "row_l2norm");
    Node n;
    n.op = Op::row_l2norm;
    n.a = x;
    n.needs_grad = needs(x);
    n.value = ops::row_l2norm(value(x));
    return push(std::move(n));
}

Graph::NodeId Graph::concat_cols(std::span<const NodeId> parts) {
    Node n;
    n.op = Op::concat_cols;
    std::vector<const Tensor*> tensors;
    tensors.reserve(parts.size());
    for (NodeId id : parts) {
        check_id(id, "concat_cols");
        n.many.push_back(id);
        n.needs_grad = n.needs_grad || needs(id);
        tensors.push_back(&value(id));
    }
    n.value = ops::concat_cols(tensors);
    return push(std::move(n));
}

Graph::NodeId Graph::slice_cols(NodeId x, std::size_t lo, std::size_t hi) {
    check_id(x, "slice_cols");
    Node n;
    n.op = Op::slice_cols;
    n.a = x;
    n.lo = lo;
    n.hi = hi;
    n.needs_grad = needs(x);
    n.value = ops::slice_cols(value(x), lo, hi);
    return push(std::move(n));
}

Graph::NodeId Graph::gather_rows(NodeId x, std::span<const std::int32_t> idx) {
    check_id(x, "gather_rows");
    Node n;
    n.op = Op::gather_rows;
    n.a = x;
    n.idx = idx;
    n.needs_grad = needs(x);
    n.value = ops::gather_rows(value(x), idx);
    return push(std::move(n));
}

Graph::NodeId Graph::pair_messages(NodeId m_rows, NodeId h, const PairTable& pairs) {
    check_id(m_rows, "pair_messages");
    check_id(h, "pair_messages");
    Node n;
    n.op = Op::pair_messages;
    n.a = m_rows;
    n.b = h;
    n.pairs = &pairs;
    n.needs_grad = needs(m_rows) || needs(h);
    n.value = ops::pair_messages(value(m_rows), value(h), pairs);
    return push(std::move(n));
}

Graph::NodeId Graph::pair_weighted_sum(NodeId msgs, const PairTable& pairs) {
    check_id(msgs, "pair_weighted_sum");
    Node n;
    n.op = Op::pair_weighted_sum;
    n.a = msgs;
    n.pairs = &pairs;
    n.needs_grad = needs(msgs);
    n.value = ops::pair_weighted_sum(value(msgs), pairs);
    return push(std::move(n));
}

Graph::NodeId Graph::pair_coord_sum(NodeId phi, const PairTable& pairs) {
    check_id(phi, "pair_coord_sum");
    Node n;
    n.op = Op::pair_coord_sum;
    n.a = phi;
    n.pairs = &pairs;
    n.needs_grad = needs(phi);
    n.value = ops::pair_coord_sum(value(phi), pairs);
    return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const {
    check_id(id, "value");
    return nodes_[static_cast<std::size_t>(id)].value;
}

std::unordered_map<Graph::NodeId, Tensor> Graph::backward(NodeId loss) {
    check_id(loss, "backward");
    if (value(loss).size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got " + value(loss).shape_str());
    }

    std::vector<Tensor> grads(nodes_.size());
    grads[static_cast<std::size_t>(loss)] = Tensor::scalar(1.0);

    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.size() == 0 || !n.needs_grad || n.op == Op::input) continue;

        switch (n.op) {
            case Op::matmul: {
                if (needs(n.a)) accumulate(grads, n.a, ops::matmul_nt(g, value(n.b)));
                if (needs(n.b)) accumulate(grads, n.b, ops::matmul_tn(value(n.a), g));
                break;
            }
            case Op::affine: {
                if (needs(n.a)) accumulate(grads, n.a, ops::matmul_nt(g, value(n.b)));
                if (needs(n.b)) accumulate(grads, n.b, ops::matmul_tn(value(n.a), g));
                if (needs(n.c)) accumulate(grads, n.c, ops::col_sums(g));
                break;
            }
            case Op::add: {
                if (needs(n.a)) accumulate(grads, n.a, g);
                if (needs(n.b)) accumulate(grads, n.b, std::move(g));
                break;
            }
            case Op::sub: {
                if (needs(n.a)) accumulate(grads, n.a, g);
                if (needs(n.b)) accumulate(grads, n.b, ops::scale(g, -1.0));
                break;
            }
            case Op::mul: {
                if (needs(n.a)) accumulate(grads, n.a, ops::mul(g, value(n.b)));
                if (needs(n.b)) accumulate(grads, n.b, ops::mul(g, value(n.a)));
                break;
            }
            case Op::scale: {
                accumulate(grads, n.a, ops::scale(g, n.factor));
                break;
            }
            case Op::add_rowvec: {
                if (needs(n.b)) accumulate(grads, n.b, ops::col_sums(g));
                if (needs(n.a)) accumulate(grads, n.a, std::move(g));
                break;
            }
            case Op::relu: {
                accumulate(grads, n.a, ops::relu_backward(value(n.a), g));
                break;
            }
            case Op::sum_all: {
                accumulate(grads, n.a, Tensor::full(value(n.a).shape(), g.item()));
                break;
            }
            case Op::l2norm: {
                const double norm = n.value.item();
                const double s = norm > 0.0 ? g.item() / norm : 0.0;
                accumulate(grads, n.a, ops::scale(value(n.a), s));
                break;
            }
            case Op::row_l2norm: {
                const Tensor& x = value(n.a);
                Tensor dx({x.rows(), x.cols()});
                for (std::size_t i = 0; i < x.rows(); ++i) {
                    const double norm = n.value[i];
                    if (norm <= 0.0) continue;
                    const double s = g[i] / norm;
                    for (std::size_t j = 0; j < x.cols(); ++j) {
                        dx.at(i, j) = s * x.at(i, j);
                    }
                }
                accumulate(grads, n.a, std::move(dx));
                break;
            }
            case Op::concat_cols: {
                std::size_t col0 = 0;
                for (NodeId part : n.many) {
                    const std::size_t w = value(part).cols();
                    if (needs(part)) accumulate(grads, part, ops::slice_cols(g, col0, col0 + w));
                    col0 += w;
                }
                break;
            }
            case Op::slice_cols: {
                const Tensor& x = value(n.a);
                Tensor dx({x.rows(), x.cols()});
                const std::size_t w = n.hi - n.lo;
                for (std::size_t i = 0; i < x.rows(); ++i) {
                    for (std::size_t j = 0; j < w; ++j) dx.at(i, n.lo + j) = g.at(i, j);
                }
                accumulate(grads, n.a, std::move(dx));
                break;
            }
            case Op::gather_rows: {
                Tensor dx({value(n.a).rows(), value(n.a).cols()});
                ops::scatter_add_rows(dx, n.idx, g);
                accumulate(grads, n.a, std::move(dx));
                break;
            }
            case Op::pair_messages: {
                // accumulates straight into the gradient slots
                Tensor* dm = needs(n.a) ? &grads[static_cast<std::size_t>(n.a)] : nullptr;
                Tensor* dh = needs(n.b) ? &grads[static_cast<std::size_t>(n.b)] : nullptr;
                ops::pair_messages_backward_into(value(n.a), value(n.b), *n.pairs, g, dm, dh);
                break;
            }
            case Op::pair_weighted_sum: {
                accumulate(grads, n.a, ops::pair_weighted_sum_backward(*n.pairs, g));
                break;
            }
            case Op::pair_coord_sum: {
                accumulate(grads, n.a, ops::pair_coord_sum_backward(*n.pairs, g));
                break;
            }
            case Op::input:
                break;
        }
        // The upstream gradient of an interior node is dead past this point.
        if (n.op != Op::input) g = Tensor();
    }

    std::unordered_map<NodeId, Tensor> result;
    for (NodeId id : grad_inputs_) {
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.size() == 0) {
            result.emplace(id, Tensor(value(id).shape()));
        } else {
            if (checked_mode() && !g.all_finite()) {
                throw std::runtime_error("backward: non-finite gradient in checked mode");
            }
            result.emplace(id, std::move(g));
        }
    }
    return result;
}

}  // namespace ino
