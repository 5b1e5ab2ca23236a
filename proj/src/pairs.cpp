#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

#include "ino/operators.hpp"

namespace ino {

namespace {

std::uint64_t fnv1a(const double* row, std::size_t n) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(row);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

bool rows_equal(const double* a, const double* b, std::size_t n) {
    return std::memcmp(a, b, n * sizeof(double)) == 0;
}

}  // namespace

void PairTable::build_groups(std::size_t unique_rows) {
    const std::size_t count = num_pairs();
    feat_offsets.assign(unique_rows + 1, 0);
    for (std::int32_t r : feature_row) feat_offsets[static_cast<std::size_t>(r) + 1]++;
    for (std::size_t i = 0; i < unique_rows; ++i) feat_offsets[i + 1] += feat_offsets[i];
    feat_pairs.resize(count);
    {
        std::vector<std::int64_t> cursor(feat_offsets.begin(), feat_offsets.end() - 1);
        for (std::size_t e = 0; e < count; ++e) {
            feat_pairs[static_cast<std::size_t>(cursor[static_cast<std::size_t>(feature_row[e])]++)] =
                static_cast<std::int32_t>(e);
        }
    }
    target_offsets.assign(num_nodes + 1, 0);
    for (std::int32_t y : targets) target_offsets[static_cast<std::size_t>(y) + 1]++;
    for (std::size_t i = 0; i < num_nodes; ++i) target_offsets[i + 1] += target_offsets[i];
    target_pairs.resize(count);
    {
        std::vector<std::int64_t> cursor(target_offsets.begin(), target_offsets.end() - 1);
        for (std::size_t e = 0; e < count; ++e) {
            target_pairs[static_cast<std::size_t>(cursor[static_cast<std::size_t>(targets[e])]++)] =
                static_cast<std::int32_t>(e);
        }
    }
}

Tensor invariant_node_features(const ChannelLayout& layout, const Tensor& f) {
    if (f.ndim() != 2 || f.cols() != layout.f_width()) {
        throw std::invalid_argument("invariant_node_features: f " + f.shape_str() +
                                    " does not match layout width " + std::to_string(layout.f_width()));
    }
    const std::size_t m = f.rows();
    const std::size_t groups = layout.f_groups.size();
    Tensor out({m, groups});
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t col = 0;
        for (std::size_t gidx = 0; gidx < groups; ++gidx) {
            const ChannelKind kind = layout.f_groups[gidx];
            if (kind == ChannelKind::vector2) {
                out.at(i, gidx) = std::hypot(f.at(i, col), f.at(i, col + 1));
            } else {
                out.at(i, gidx) = f.at(i, col);
            }
            col += channel_width(kind);
        }
    }
    return out;
}

std::vector<double> kernel_features(const OperatorConfig& config, const PointCloud& cloud, const Tensor& f,
                                    std::size_t i, std::size_t j) {
    const std::size_t m = cloud.num_nodes();
    if (i >= m || j >= m) throw std::invalid_argument("kernel_features: node index out of range");
    std::vector<double> row;
    row.reserve(config.kernel_input_width());
    if (config.arch == Architecture::gno) {
        row.push_back(cloud.x(i));
        row.push_back(cloud.y(i));
        row.push_back(cloud.x(j));
        row.push_back(cloud.y(j));
        for (std::size_t c = 0; c < f.cols(); ++c) row.push_back(f.at(i, c));
        for (std::size_t c = 0; c < f.cols(); ++c) row.push_back(f.at(j, c));
        return row;
    }
    const Tensor inv = invariant_node_features(config.layout, f);
    if (config.arch == Architecture::norm_ino) {
        const double dx = cloud.x(j) - cloud.x(i);
        const double dy = cloud.y(j) - cloud.y(i);
        row.push_back(std::hypot(dx, dy));
    } else {
        const auto edge = invariant_edge_features(cloud, i, j);
        row.push_back(edge[0]);
        row.push_back(edge[1]);
    }
    for (std::size_t c = 0; c < inv.cols(); ++c) row.push_back(inv.at(i, c));
    for (std::size_t c = 0; c < inv.cols(); ++c) row.push_back(inv.at(j, c));
    return row;
}

SampleCache build_cache(const OperatorConfig& config, const PointCloud& cloud, const Tensor& f, bool dedup) {
    config.validate();
    cloud.validate();
    if (f.ndim() != 2 || f.rows() != cloud.num_nodes() || f.cols() != config.layout.f_width()) {
        throw std::invalid_argument("build_cache: f " + f.shape_str() + " does not match cloud/layout");
    }

    const std::size_t m = cloud.num_nodes();
    const std::size_t n = config.kernel_input_width();
    const bool ball = std::isfinite(config.radius);
    const bool wants_diffs = is_vector_output(config.arch);
    const bool gno = config.arch == Architecture::gno;
    const bool norm_only = config.arch == Architecture::norm_ino;

    Tensor inv;
    if (!gno) inv = invariant_node_features(config.layout, f);
    const auto ref = cloud.ref_vector();

    SampleCache cache;
    PairTable& pairs = cache.pairs;
    pairs.num_nodes = m;
    pairs.offsets.assign(m + 1, 0);

    std::vector<double> rows;   // unique feature rows, row-major
    std::size_t unique_count = 0;
    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> seen;
    std::vector<double> row(n);

    for (std::size_t i = 0; i < m; ++i) {
        const double xi = cloud.x(i), yi = cloud.y(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double dx = cloud.x(j) - xi;
            const double dy = cloud.y(j) - yi;
            if (ball && std::hypot(dx, dy) > config.radius) continue;

            if (gno) {
                row[0] = xi;
                row[1] = yi;
                row[2] = cloud.x(j);
                row[3] = cloud.y(j);
                const std::size_t df = f.cols();
                for (std::size_t c = 0; c < df; ++c) row[4 + c] = f.at(i, c);
                for (std::size_t c = 0; c < df; ++c) row[4 + df + c] = f.at(j, c);
            } else {
                std::size_t base = 0;
                if (norm_only) {
                    row[0] = std::hypot(dx, dy);
                    base = 1;
                } else {
                    if (i == j) {
                        row[0] = 0.0;
                        row[1] = 0.0;
                    } else {
                        const double len = std::hypot(dx, dy);
                        const double theta = signed_angle({dx, dy}, ref);
                        row[0] = len * std::cos(theta);
                        row[1] = len * std::sin(theta);
                    }
                    base = 2;
                }
                const std::size_t groups = inv.cols();
                for (std::size_t c = 0; c < groups; ++c) row[base + c] = inv.at(i, c);
                for (std::size_t c = 0; c < groups; ++c) row[base + groups + c] = inv.at(j, c);
            }

            std::int32_t row_id;
            if (dedup) {
                const std::uint64_t h = fnv1a(row.data(), n);
                auto& bucket = seen[h];
                row_id = -1;
                for (std::int32_t cand : bucket) {
                    if (rows_equal(rows.data() + static_cast<std::size_t>(cand) * n, row.data(), n)) {
                        row_id = cand;
                        break;
                    }
                }
                if (row_id < 0) {
                    row_id = static_cast<std::int32_t>(unique_count++);
                    rows.insert(rows.end(), row.begin(), row.end());
                    bucket.push_back(row_id);
                }
            } else {
                row_id = static_cast<std::int32_t>(unique_count++);
                rows.insert(rows.end(), row.begin(), row.end());
            }

            pairs.targets.push_back(static_cast<std::int32_t>(j));
            pairs.feature_row.push_back(row_id);
            pairs.weights.push_back(cloud.quad_weights[j]);
            if (wants_diffs) {
                pairs.diffs.push_back(-dx);  // x - y
                pairs.diffs.push_back(-dy);
            }
        }
        pairs.offsets[i + 1] = static_cast<std::int64_t>(pairs.targets.size());
    }

    if (ball) {
        for (std::size_t i = 0; i < m; ++i) {
            if (pairs.offsets[i + 1] == pairs.offsets[i]) {
                throw std::runtime_error("build_cache: node " + std::to_string(i) +
                                         " has an empty integration neighborhood");
            }
        }
    }

    cache.features = Tensor({unique_count, n}, std::move(rows));
    pairs.build_groups(unique_count);
    return cache;
}

}  // namespace ino
