#include "ino/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace ino::ops {

namespace {

[[noreturn]] void shape_error(const char* prim, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(prim) + ": incompatible shapes " + a.shape_str() + " and " +
                                b.shape_str());
}

void require_2d(const char* prim, const Tensor& t) {
    if (t.ndim() != 2) {
        throw std::invalid_argument(std::string(prim) + ": expected 2-D tensor, got " + t.shape_str());
    }
}

// C (m x n) = A (m x k) @ B (k x n) [+ bias], row-major. The k-loop is
// unrolled by four so each pass touches four B rows per sweep of the C row.
void gemm_nn_raw(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                 const double* bias = nullptr) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        std::memset(crow, 0, sizeof(double) * n);
        std::size_t p = 0;
        for (; p + 4 <= k; p += 4) {
            const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
            const double* b0 = b + p * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
        }
        for (; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
        if (bias) {
            for (std::size_t j = 0; j < n; ++j) crow[j] += bias[j];
        }
    }
}

// C (m x n) = A (m x k) @ B^T with B stored (n x k). B is a parameter-sized
// matrix here, so transposing it once and running the streaming nn kernel
// beats dot products.
void gemm_nt_raw(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> bt(k * n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    }
    gemm_nn_raw(a, bt.data(), c, m, k, n);
}

// C (m x n) = A^T @ B with A stored (k x m). Threads own disjoint column
// blocks of C and accumulate outer products in k order, so rows of A and B
// stream sequentially and the reduction order is fixed.
void gemm_tn_raw(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t jb = 64;
    const auto nblocks = static_cast<std::int64_t>((n + jb - 1) / jb);
#pragma omp parallel for schedule(static)
    for (std::int64_t blk = 0; blk < nblocks; ++blk) {
        const std::size_t j0 = static_cast<std::size_t>(blk) * jb;
        const std::size_t j1 = std::min(j0 + jb, n);
        for (std::size_t i = 0; i < m; ++i) std::memset(c + i * n + j0, 0, sizeof(double) * (j1 - j0));
        for (std::size_t p = 0; p < k; ++p) {
            const double* arow = a + p * m;
            const double* brow = b + p * n;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = arow[i];
                double* crow = c + i * n;
                for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Tensor c({a.rows(), b.cols()});
    gemm_nn_raw(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d("matmul_nt", a);
    require_2d("matmul_nt", b);
    if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
    Tensor c({a.rows(), b.rows()});
    gemm_nt_raw(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d("matmul_tn", a);
    require_2d("matmul_tn", b);
    if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
    Tensor c({a.cols(), b.cols()});
    gemm_tn_raw(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
    return c;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require_2d("affine", x);
    require_2d("affine", w);
    if (x.cols() != w.rows()) shape_error("affine", x, w);
    if (bias.ndim() != 1 || bias.size() != w.cols()) shape_error("affine", w, bias);
    Tensor c({x.rows(), w.cols()});
    gemm_nn_raw(x.data(), w.data(), c.data(), x.rows(), x.cols(), w.cols(), bias.data());
    return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_error("add", a, b);
    Tensor c = a;
    const double* pb = b.data();
    double* pc = c.data();
    const auto count = static_cast<std::int64_t>(c.size());
#pragma omp parallel for schedule(static) if (count > 65536)
    for (std::int64_t i = 0; i < count; ++i) pc[i] += pb[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_error("sub", a, b);
    Tensor c = a;
    const double* pb = b.data();
    double* pc = c.data();
    const auto count = static_cast<std::int64_t>(c.size());
#pragma omp parallel for schedule(static) if (count > 65536)
    for (std::int64_t i = 0; i < count; ++i) pc[i] -= pb[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_error("mul", a, b);
    Tensor c = a;
    const double* pb = b.data();
    double* pc = c.data();
    const auto count = static_cast<std::int64_t>(c.size());
#pragma omp parallel for schedule(static) if (count > 65536)
    for (std::int64_t i = 0; i < count; ++i) pc[i] *= pb[i];
    return c;
}

Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    double* pc = c.data();
    const auto count = static_cast<std::int64_t>(c.size());
#pragma omp parallel for schedule(static) if (count > 65536)
    for (std::int64_t i = 0; i < count; ++i) pc[i] *= s;
    return c;
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
    require_2d("add_rowvec", x);
    if (bias.ndim() != 1 || bias.size() != x.cols()) shape_error("add_rowvec", x, bias);
    Tensor c = x;
    const double* pb = bias.data();
    const std::size_t n = x.cols();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.rows()); ++i) {
        double* crow = c.data() + static_cast<std::size_t>(i) * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += pb[j];
    }
    return c;
}

Tensor col_sums(const Tensor& x) {
    require_2d("col_sums", x);
    Tensor out({x.cols()});
    const std::size_t n = x.cols();
    double* po = out.data();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* row = x.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) po[j] += row[j];
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor c = x;
    double* pc = c.data();
    const auto count = static_cast<std::int64_t>(c.size());
#pragma omp parallel for schedule(static) if (count > 65536)
    for (std::int64_t i = 0; i < count; ++i) pc[i] = pc[i] > 0.0 ? pc[i] : 0.0;
    return c;
}

Tensor relu_backward(const Tensor& input, const Tensor& gout) {
    if (!input.same_shape(gout)) shape_error("relu_backward", input, gout);
    Tensor g = gout;
    const double* pi = input.data();
    double* pg = g.data();
    const auto count = static_cast<std::int64_t>(g.size());
#pragma omp parallel for schedule(static) if (count > 65536)
    for (std::int64_t i = 0; i < count; ++i) {
        if (pi[i] <= 0.0) pg[i] = 0.0;
    }
    return g;
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    const double* px = x.data();
    for (std::size_t i = 0; i < x.size(); ++i) s += px[i];
    return Tensor::scalar(s);
}

Tensor l2norm(const Tensor& x) {
    double s = 0.0;
    const double* px = x.data();
    for (std::size_t i = 0; i < x.size(); ++i) s += px[i] * px[i];
    return Tensor::scalar(std::sqrt(s));
}

Tensor row_l2norm(const Tensor& x) {
    require_2d("row_l2norm", x);
    Tensor out({x.rows(), 1});
    const std::size_t n = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* row = x.data() + i * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += row[j] * row[j];
        out[i] = std::sqrt(s);
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor* const> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t m = parts[0]->rows();
    std::size_t n = 0;
    for (const Tensor* t : parts) {
        require_2d("concat_cols", *t);
        if (t->rows() != m) shape_error("concat_cols", *parts[0], *t);
        n += t->cols();
    }
    Tensor out({m, n});
    std::size_t col0 = 0;
    for (const Tensor* t : parts) {
        const std::size_t w = t->cols();
        for (std::size_t i = 0; i < m; ++i) {
            std::memcpy(out.data() + i * n + col0, t->data() + i * w, sizeof(double) * w);
        }
        col0 += w;
    }
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t lo, std::size_t hi) {
    require_2d("slice_cols", x);
    if (lo >= hi || hi > x.cols()) {
        throw std::invalid_argument("slice_cols: range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                    ") invalid for " + x.shape_str());
    }
    const std::size_t n = x.cols(), w = hi - lo;
    Tensor out({x.rows(), w});
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::memcpy(out.data() + i * w, x.data() + i * n + lo, sizeof(double) * w);
    }
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::int32_t> idx) {
    require_2d("gather_rows", x);
    const std::size_t n = x.cols();
    Tensor out({idx.size(), n});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto r = static_cast<std::size_t>(idx[i]);
        if (r >= x.rows()) throw std::invalid_argument("gather_rows: index out of range");
        std::memcpy(out.data() + i * n, x.data() + r * n, sizeof(double) * n);
    }
    return out;
}

void scatter_add_rows(Tensor& dst, std::span<const std::int32_t> idx, const Tensor& src) {
    require_2d("scatter_add_rows", dst);
    require_2d("scatter_add_rows", src);
    if (src.rows() != idx.size() || src.cols() != dst.cols()) shape_error("scatter_add_rows", dst, src);
    const std::size_t n = dst.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto r = static_cast<std::size_t>(idx[i]);
        double* drow = dst.data() + r * n;
        const double* srow = src.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) drow[j] += srow[j];
    }
}

Tensor pair_messages(const Tensor& m_rows, const Tensor& h, const PairTable& pairs) {
    require_2d("pair_messages", m_rows);
    require_2d("pair_messages", h);
    const std::size_t dh = h.cols();
    if (m_rows.cols() != dh * dh) shape_error("pair_messages", m_rows, h);
    Tensor msgs({pairs.num_pairs(), dh});
#pragma omp parallel for schedule(static)
    for (std::int64_t x = 0; x < static_cast<std::int64_t>(pairs.num_nodes); ++x) {
        for (std::int64_t e = pairs.offsets[x]; e < pairs.offsets[x + 1]; ++e) {
            const double* mat = m_rows.data() + static_cast<std::size_t>(pairs.feature_row[e]) * dh * dh;
            const double* hy = h.data() + static_cast<std::size_t>(pairs.targets[e]) * dh;
            double* out = msgs.data() + static_cast<std::size_t>(e) * dh;
            for (std::size_t r = 0; r < dh; ++r) {
                const double* mrow = mat + r * dh;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += mrow[c] * hy[c];
                out[r] = s;
            }
        }
    }
    return msgs;
}

std::pair<Tensor, Tensor> pair_messages_backward(const Tensor& m_rows, const Tensor& h,
                                                 const PairTable& pairs, const Tensor& gout) {
    Tensor dm, dhz;
    pair_messages_backward_into(m_rows, h, pairs, gout, &dm, &dhz);
    return {std::move(dm), std::move(dhz)};
}

void pair_messages_backward_into(const Tensor& m_rows, const Tensor& h, const PairTable& pairs,
                                 const Tensor& gout, Tensor* dm_out, Tensor* dh_out) {
    if (!pairs.has_groups()) {
        throw std::invalid_argument("pair_messages_backward: pair table has no group index");
    }
    const std::size_t dh = h.cols();

    // Each dm row is owned by one feature group and each dh row by one target
    // group; pairs are ascending within a group, so sums are deterministic.
    if (dm_out) {
        if (dm_out->size() == 0) *dm_out = Tensor({m_rows.rows(), m_rows.cols()});
        Tensor& dm = *dm_out;
#pragma omp parallel for schedule(static)
        for (std::int64_t u = 0; u < static_cast<std::int64_t>(m_rows.rows()); ++u) {
            double* dmat = dm.data() + static_cast<std::size_t>(u) * dh * dh;
            for (std::int64_t s = pairs.feat_offsets[u]; s < pairs.feat_offsets[u + 1]; ++s) {
                const auto e = static_cast<std::size_t>(pairs.feat_pairs[static_cast<std::size_t>(s)]);
                const double* g = gout.data() + e * dh;
                const double* hy = h.data() + static_cast<std::size_t>(pairs.targets[e]) * dh;
                for (std::size_t r = 0; r < dh; ++r) {
                    const double gr = g[r];
                    double* dmrow = dmat + r * dh;
                    for (std::size_t c = 0; c < dh; ++c) dmrow[c] += gr * hy[c];
                }
            }
        }
    }
    if (dh_out) {
        if (dh_out->size() == 0) *dh_out = Tensor({h.rows(), dh});
        Tensor& dhz = *dh_out;
#pragma omp parallel for schedule(static)
        for (std::int64_t y = 0; y < static_cast<std::int64_t>(pairs.num_nodes); ++y) {
            double* dhy = dhz.data() + static_cast<std::size_t>(y) * dh;
            for (std::int64_t s = pairs.target_offsets[y]; s < pairs.target_offsets[y + 1]; ++s) {
                const auto e = static_cast<std::size_t>(pairs.target_pairs[static_cast<std::size_t>(s)]);
                const double* g = gout.data() + e * dh;
                const double* mat = m_rows.data() + static_cast<std::size_t>(pairs.feature_row[e]) * dh * dh;
                for (std::size_t r = 0; r < dh; ++r) {
                    const double gr = g[r];
                    const double* mrow = mat + r * dh;
                    for (std::size_t c = 0; c < dh; ++c) dhy[c] += gr * mrow[c];
                }
            }
        }
    }
}

Tensor pair_weighted_sum(const Tensor& msgs, const PairTable& pairs) {
    require_2d("pair_weighted_sum", msgs);
    const std::size_t dh = msgs.cols();
    Tensor out({pairs.num_nodes, dh});
#pragma omp parallel for schedule(static)
    for (std::int64_t x = 0; x < static_cast<std::int64_t>(pairs.num_nodes); ++x) {
        double* orow = out.data() + static_cast<std::size_t>(x) * dh;
        for (std::int64_t e = pairs.offsets[x]; e < pairs.offsets[x + 1]; ++e) {
            const double w = pairs.weights[e];
            const double* msg = msgs.data() + static_cast<std::size_t>(e) * dh;
            for (std::size_t j = 0; j < dh; ++j) orow[j] += w * msg[j];
        }
    }
    return out;
}

Tensor pair_weighted_sum_backward(const PairTable& pairs, const Tensor& gout) {
    const std::size_t dh = gout.cols();
    Tensor dmsgs({pairs.num_pairs(), dh});
#pragma omp parallel for schedule(static)
    for (std::int64_t x = 0; x < static_cast<std::int64_t>(pairs.num_nodes); ++x) {
        const double* grow = gout.data() + static_cast<std::size_t>(x) * dh;
        for (std::int64_t e = pairs.offsets[x]; e < pairs.offsets[x + 1]; ++e) {
            const double w = pairs.weights[e];
            double* drow = dmsgs.data() + static_cast<std::size_t>(e) * dh;
            for (std::size_t j = 0; j < dh; ++j) drow[j] = w * grow[j];
        }
    }
    return dmsgs;
}

Tensor pair_coord_sum(const Tensor& phi, const PairTable& pairs) {
    if (phi.size() != pairs.num_pairs()) {
        throw std::invalid_argument("pair_coord_sum: phi size " + std::to_string(phi.size()) +
                                    " != pair count " + std::to_string(pairs.num_pairs()));
    }
    if (pairs.diffs.size() != 2 * pairs.num_pairs()) {
        throw std::invalid_argument("pair_coord_sum: pair table has no coordinate differences");
    }
    Tensor out({pairs.num_nodes, 2});
#pragma omp parallel for schedule(static)
    for (std::int64_t x = 0; x < static_cast<std::int64_t>(pairs.num_nodes); ++x) {
        double sx = 0.0, sy = 0.0;
        for (std::int64_t e = pairs.offsets[x]; e < pairs.offsets[x + 1]; ++e) {
            const double wphi = pairs.weights[e] * phi[static_cast<std::size_t>(e)];
            sx += wphi * pairs.diffs[2 * static_cast<std::size_t>(e)];
            sy += wphi * pairs.diffs[2 * static_cast<std::size_t>(e) + 1];
        }
        out[2 * static_cast<std::size_t>(x)] = sx;
        out[2 * static_cast<std::size_t>(x) + 1] = sy;
    }
    return out;
}

Tensor pair_coord_sum_backward(const PairTable& pairs, const Tensor& gout) {
    Tensor dphi({pairs.num_pairs(), 1});
#pragma omp parallel for schedule(static)
    for (std::int64_t x = 0; x < static_cast<std::int64_t>(pairs.num_nodes); ++x) {
        const double gx = gout[2 * static_cast<std::size_t>(x)];
        const double gy = gout[2 * static_cast<std::size_t>(x) + 1];
        for (std::int64_t e = pairs.offsets[x]; e < pairs.offsets[x + 1]; ++e) {
            dphi[static_cast<std::size_t>(e)] =
                pairs.weights[e] * (gx * pairs.diffs[2 * static_cast<std::size_t>(e)] +
                                    gy * pairs.diffs[2 * static_cast<std::size_t>(e) + 1]);
        }
    }
    return dphi;
}

}  // namespace ino::ops
