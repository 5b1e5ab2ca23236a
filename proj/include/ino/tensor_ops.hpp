#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "ino/pairs.hpp"
#include "ino/tensor.hpp"

namespace ino::ops {

// Dense primitives. All are pure functions of their inputs; parallel loops
// partition output rows so results are bit-identical for any thread count.

Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k) @ (k,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m,k) @ (n,k)^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // (k,m)^T @ (k,n)
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);  // x @ w + bias

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& x, const Tensor& bias);  // (m,n) + (n,)
Tensor col_sums(const Tensor& x);                        // (m,n) -> (n,)

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& input, const Tensor& gout);

Tensor sum_all(const Tensor& x);    // -> scalar
Tensor l2norm(const Tensor& x);     // flat l2 norm -> scalar
Tensor row_l2norm(const Tensor& x); // (m,n) -> (m,1)

Tensor concat_cols(std::span<const Tensor* const> parts);
Tensor slice_cols(const Tensor& x, std::size_t lo, std::size_t hi);

Tensor gather_rows(const Tensor& x, std::span<const std::int32_t> idx);
void scatter_add_rows(Tensor& dst, std::span<const std::int32_t> idx, const Tensor& src);

// Kernel-integral primitives.
//
// pair_messages:      msg_e = mat(m[feature_row[e]]) . h[target[e]]
// pair_weighted_sum:  out_x = sum_{e in row x} weights[e] * msg_e
// pair_coord_sum:     out_x = sum_{e in row x} weights[e] * diffs_e * phi_e

Tensor pair_messages(const Tensor& m_rows, const Tensor& h, const PairTable& pairs);
std::pair<Tensor, Tensor> pair_messages_backward(const Tensor& m_rows, const Tensor& h,
                                                 const PairTable& pairs, const Tensor& gout);

/// Accumulating form: adds into dm/dh when given, allocating empty slots.
void pair_messages_backward_into(const Tensor& m_rows, const Tensor& h, const PairTable& pairs,
                                 const Tensor& gout, Tensor* dm, Tensor* dh);

Tensor pair_weighted_sum(const Tensor& msgs, const PairTable& pairs);
Tensor pair_weighted_sum_backward(const PairTable& pairs, const Tensor& gout);

Tensor pair_coord_sum(const Tensor& phi, const PairTable& pairs);
Tensor pair_coord_sum_backward(const PairTable& pairs, const Tensor& gout);

}  // namespace ino::ops
