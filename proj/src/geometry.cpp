#include "ino/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ino {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

std::array<double, 2> PointCloud::ref_vector() const {
    const std::size_t r1 = ref_edge[0], r2 = ref_edge[1];
    return {x(r2) - x(r1), y(r2) - y(r1)};
}

void PointCloud::validate() const {
    const std::size_t m = num_nodes();
    if (m == 0 || coords.ndim() != 2 || coords.cols() != 2) {
        throw std::invalid_argument("PointCloud: coords must be (M, 2)");
    }
    if (quad_weights.size() != m) throw std::invalid_argument("PointCloud: weight count != node count");
    for (double w : quad_weights) {
        if (!(w > 0.0)) throw std::invalid_argument("PointCloud: quadrature weights must be positive");
    }
    if (!region.empty() && region.size() != m) {
        throw std::invalid_argument("PointCloud: region tag count != node count");
    }
    if (ref_edge[0] == ref_edge[1] || ref_edge[0] >= m || ref_edge[1] >= m) {
        throw std::invalid_argument("PointCloud: reference edge must name two distinct nodes");
    }
    const auto rv = ref_vector();
    if (rv[0] == 0.0 && rv[1] == 0.0) {
        throw std::invalid_argument("PointCloud: reference edge has zero length");
    }
}

FrameTransform FrameTransform::rotation(double theta) {
    FrameTransform t;
    const double c = std::cos(theta), s = std::sin(theta);
    t.r = {c, -s, s, c};
    return t;
}

FrameTransform FrameTransform::translation(double gx, double gy) {
    FrameTransform t;
    t.g = {gx, gy};
    return t;
}

std::array<double, 2> FrameTransform::apply(double px, double py) const {
    return {r[0] * px + r[1] * py + g[0], r[2] * px + r[3] * py + g[1]};
}

std::array<double, 2> FrameTransform::rotate(double vx, double vy) const {
    return {r[0] * vx + r[1] * vy, r[2] * vx + r[3] * vy};
}

bool FrameTransform::is_orthogonal(double tol) const {
    const double a = r[0] * r[0] + r[2] * r[2] - 1.0;
    const double b = r[1] * r[1] + r[3] * r[3] - 1.0;
    const double c = r[0] * r[1] + r[2] * r[3];
    return std::abs(a) <= tol && std::abs(b) <= tol && std::abs(c) <= tol;
}

FrameTransform compose(const FrameTransform& second, const FrameTransform& first) {
    FrameTransform t;
    t.r = {second.r[0] * first.r[0] + second.r[1] * first.r[2],
           second.r[0] * first.r[1] + second.r[1] * first.r[3],
           second.r[2] * first.r[0] + second.r[3] * first.r[2],
           second.r[2] * first.r[1] + second.r[3] * first.r[3]};
    const auto gg = second.apply(first.g[0], first.g[1]);
    t.g = {gg[0], gg[1]};
    return t;
}

std::size_t ChannelLayout::f_width() const {
    std::size_t w = 0;
    for (ChannelKind k : f_groups) w += channel_width(k);
    return w;
}

std::size_t ChannelLayout::u_width() const {
    std::size_t w = 0;
    for (ChannelKind k : u_groups) w += channel_width(k);
    return w;
}

ChannelLayout ChannelLayout::scalar_to_scalar() {
    ChannelLayout l;
    l.f_groups = {ChannelKind::scalar};
    l.u_groups = {ChannelKind::scalar};
    return l;
}

ChannelLayout ChannelLayout::vector_bc_to_displacement() {
    ChannelLayout l;
    l.f_groups = {ChannelKind::vector2, ChannelKind::scalar};
    l.u_groups = {ChannelKind::vector2};
    return l;
}

PointCloud make_grid(std::size_t rows, std::size_t cols, const Rect& domain) {
    if (rows < 2 || cols < 2) throw std::invalid_argument("make_grid: rows and cols must be >= 2");
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
        throw std::invalid_argument("make_grid: degenerate domain rectangle");
    }
    const std::size_t m = rows * cols;
    const double dx = domain.width() / static_cast<double>(cols - 1);
    const double dy = domain.height() / static_cast<double>(rows - 1);

    PointCloud cloud;
    cloud.coords = Tensor({m, 2});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            cloud.coords[2 * i] = domain.x0 + static_cast<double>(c) * dx;
            cloud.coords[2 * i + 1] = domain.y0 + static_cast<double>(r) * dy;
        }
    }
    cloud.quad_weights.assign(m, domain.area() / static_cast<double>(m));
    cloud.grid = GridDesc{rows, cols, domain.x0, domain.y0, dx, dy};
    cloud.validate();
    return cloud;
}

PointCloud make_disk(double spacing, double omega_radius, double b_radius, double bb_radius) {
    if (!(spacing > 0.0)) throw std::invalid_argument("make_disk: spacing must be positive");
    if (spacing > omega_radius) throw std::invalid_argument("make_disk: spacing larger than radius");
    if (!(omega_radius <= b_radius && b_radius <= bb_radius)) {
        throw std::invalid_argument("make_disk: radii must be non-decreasing");
    }

    std::vector<double> xs, ys;
    std::vector<Region> tags;
    const auto n = static_cast<long>(std::floor(bb_radius / spacing + 1e-12));
    for (long j = -n; j <= n; ++j) {
        for (long i = -n; i <= n; ++i) {
            const double px = static_cast<double>(i) * spacing;
            const double py = static_cast<double>(j) * spacing;
            const double rad = std::hypot(px, py);
            if (rad > bb_radius + 1e-12) continue;
            xs.push_back(px);
            ys.push_back(py);
            if (rad <= omega_radius + 1e-12) {
                tags.push_back(Region::interior);
            } else if (rad <= b_radius + 1e-12) {
                tags.push_back(Region::boundary_inner);
            } else {
                tags.push_back(Region::boundary_outer);
            }
        }
    }

    const std::size_t m = xs.size();
    PointCloud cloud;
    cloud.coords = Tensor({m, 2});
    for (std::size_t i = 0; i < m; ++i) {
        cloud.coords[2 * i] = xs[i];
        cloud.coords[2 * i + 1] = ys[i];
    }
    const double area = kPi * bb_radius * bb_radius;
    cloud.quad_weights.assign(m, area / static_cast<double>(m));
    cloud.region = std::move(tags);
    cloud.validate();
    return cloud;
}

PointCloud make_disk(double spacing, double radius) {
    PointCloud cloud = make_disk(spacing, radius, radius, radius);
    cloud.region.clear();
    return cloud;
}

double signed_angle(std::array<double, 2> v, std::array<double, 2> ref) {
    if (ref[0] == 0.0 && ref[1] == 0.0) {
        throw std::invalid_argument("signed_angle: zero reference vector");
    }
    if (v[0] == 0.0 && v[1] == 0.0) return 0.0;
    const double cross = ref[0] * v[1] - ref[1] * v[0];
    const double dot = ref[0] * v[0] + ref[1] * v[1];
    double theta = std::atan2(cross, dot);
    if (theta == -kPi) theta = kPi;
    return theta;
}

std::array<double, 2> invariant_edge_features(const PointCloud& cloud, std::size_t i, std::size_t j) {
    const std::size_t m = cloud.num_nodes();
    if (i >= m || j >= m) throw std::invalid_argument("invariant_edge_features: node index out of range");
    if (i == j) return {0.0, 0.0};
    const double dx = cloud.x(j) - cloud.x(i);
    const double dy = cloud.y(j) - cloud.y(i);
    const double len = std::hypot(dx, dy);
    if (len == 0.0) return {0.0, 0.0};
    const double theta = signed_angle({dx, dy}, cloud.ref_vector());
    return {len * std::cos(theta), len * std::sin(theta)};
}

Tensor transform_field(const Tensor& field, const FrameTransform& t, const std::vector<ChannelKind>& groups) {
    Tensor out = field;
    if (field.size() == 0) return out;
    std::size_t col = 0;
    for (ChannelKind k : groups) {
        if (k == ChannelKind::vector2) {
            for (std::size_t i = 0; i < field.rows(); ++i) {
                const auto v = t.rotate(field.at(i, col), field.at(i, col + 1));
                out.at(i, col) = v[0];
                out.at(i, col + 1) = v[1];
            }
        }
        col += channel_width(k);
    }
    if (col != field.cols()) {
        throw std::invalid_argument("transform_field: layout width " + std::to_string(col) +
                                    " does not match field " + field.shape_str());
    }
    return out;
}

std::pair<PointCloud, FunctionSample> apply_transform(const PointCloud& cloud, const FunctionSample& sample,
                                                      const FrameTransform& t, const ChannelLayout& layout) {
    if (!t.is_orthogonal()) throw std::invalid_argument("apply_transform: R is not orthogonal");
    if (sample.f.size() != 0 && (sample.f.ndim() != 2 || sample.f.cols() != layout.f_width() ||
                                 sample.f.rows() != cloud.num_nodes())) {
        throw std::invalid_argument("apply_transform: f " + sample.f.shape_str() +
                                    " does not match layout width " + std::to_string(layout.f_width()));
    }
    if (sample.u.size() != 0 && (sample.u.ndim() != 2 || sample.u.cols() != layout.u_width() ||
                                 sample.u.rows() != cloud.num_nodes())) {
        throw std::invalid_argument("apply_transform: u " + sample.u.shape_str() +
                                    " does not match layout width " + std::to_string(layout.u_width()));
    }

    PointCloud moved;
    moved.coords = Tensor({cloud.num_nodes(), 2});
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        const auto p = t.apply(cloud.x(i), cloud.y(i));
        moved.coords[2 * i] = p[0];
        moved.coords[2 * i + 1] = p[1];
    }
    moved.quad_weights = cloud.quad_weights;  // rigid motions preserve area
    moved.ref_edge = cloud.ref_edge;
    moved.region = cloud.region;
    const bool pure_shift = t.r[0] == 1.0 && t.r[1] == 0.0 && t.r[2] == 0.0 && t.r[3] == 1.0;
    if (cloud.grid && pure_shift) {
        GridDesc d = *cloud.grid;
        d.x0 += t.g[0];
        d.y0 += t.g[1];
        moved.grid = d;
    }

    FunctionSample out;
    out.f = sample.f.size() ? transform_field(sample.f, t, layout.f_groups) : sample.f;
    out.u = sample.u.size() ? transform_field(sample.u, t, layout.u_groups) : sample.u;
    return {std::move(moved), std::move(out)};
}

FrameTransform random_transform(double C, TransformMode mode, Rng& rng) {
    if (C < 0.0) throw std::invalid_argument("random_transform: range must be >= 0");
    if (mode == TransformMode::translate) {
        const double gx = rng.uniform(-C, C);
        const double gy = rng.uniform(-C, C);
        return FrameTransform::translation(gx, gy);
    }
    return FrameTransform::rotation(rng.uniform(0.0, C));
}

FrameTransform random_rigid(double translate_C, double rotate_C, Rng& rng) {
    FrameTransform rot = FrameTransform::rotation(rng.uniform(0.0, rotate_C));
    const double mag = rng.uniform(0.0, translate_C);
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    FrameTransform shift = FrameTransform::translation(mag * std::cos(dir), mag * std::sin(dir));
    return compose(shift, rot);
}

}  // namespace ino
