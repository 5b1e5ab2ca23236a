#pragma once

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ino/nn.hpp"
#include "ino/tape.hpp"
#include "ino/tensor_ops.hpp"

namespace ino {

// The operator forward pass is written once against this pair of engines:
// EagerEngine computes plain tensors (evaluation path, intermediates freed by
// scope), TapeEngine records the same arithmetic on a Graph for backward.
// Both route through the kernels in ino::ops, so values are bit-identical.

struct EagerEngine {
    using Ref = Tensor;

    Ref constant(Tensor t) const { return t; }
    Ref param(const Tensor& t) const { return t; }
    const Tensor& val(const Ref& r) const { return r; }

    Ref matmul(const Ref& a, const Ref& b) const { return ops::matmul(a, b); }
    Ref affine(const Ref& x, const Ref& w, const Ref& b) const { return ops::affine(x, w, b); }
    Ref add(const Ref& a, const Ref& b) const { return ops::add(a, b); }
    Ref sub(const Ref& a, const Ref& b) const { return ops::sub(a, b); }
    Ref scale(const Ref& a, double s) const { return ops::scale(a, s); }
    Ref add_rowvec(const Ref& x, const Ref& b) const { return ops::add_rowvec(x, b); }
    Ref relu(const Ref& x) const { return ops::relu(x); }
    Ref pair_messages(const Ref& m, const Ref& h, const PairTable& p) const {
        return ops::pair_messages(m, h, p);
    }
    Ref pair_weighted_sum(const Ref& msgs, const PairTable& p) const {
        return ops::pair_weighted_sum(msgs, p);
    }
    Ref pair_coord_sum(const Ref& phi, const PairTable& p) const { return ops::pair_coord_sum(phi, p); }
};

struct TapeEngine {
    Graph* g = nullptr;
    using Ref = Graph::NodeId;

    Ref constant(Tensor t) const { return g->input(std::move(t), false); }
    Ref param(const Tensor& t) const { return g->input(t, true); }
    const Tensor& val(Ref r) const { return g->value(r); }

    Ref matmul(Ref a, Ref b) const { return g->matmul(a, b); }
    Ref affine(Ref x, Ref w, Ref b) const { return g->affine(x, w, b); }
    Ref add(Ref a, Ref b) const { return g->add(a, b); }
    Ref sub(Ref a, Ref b) const { return g->sub(a, b); }
    Ref scale(Ref a, double s) const { return g->scale(a, s); }
    Ref add_rowvec(Ref x, Ref b) const { return g->add_rowvec(x, b); }
    Ref relu(Ref x) const { return g->relu(x); }
    Ref pair_messages(Ref m, Ref h, const PairTable& p) const { return g->pair_messages(m, h, p); }
    Ref pair_weighted_sum(Ref msgs, const PairTable& p) const { return g->pair_weighted_sum(msgs, p); }
    Ref pair_coord_sum(Ref phi, const PairTable& p) const { return g->pair_coord_sum(phi, p); }
};

/// Affine + activation chain over engine refs; layers are (W, b) pairs.
template <class E>
typename E::Ref mlp_apply(E& eng, std::span<const std::pair<typename E::Ref, typename E::Ref>> layers,
                          const typename E::Ref& x, std::span<const Activation> activations) {
    if (layers.empty() || layers.size() != activations.size()) {
        throw std::invalid_argument("mlp_apply: inconsistent layer list");
    }
    typename E::Ref h = eng.affine(x, layers[0].first, layers[0].second);
    if (activations[0] == Activation::relu) h = eng.relu(h);
    for (std::size_t i = 1; i < layers.size(); ++i) {
        h = eng.affine(h, layers[i].first, layers[i].second);
        if (activations[i] == Activation::relu) h = eng.relu(h);
    }
    return h;
}

}  // namespace ino
