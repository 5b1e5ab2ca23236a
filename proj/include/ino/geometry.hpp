#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ino/rng.hpp"
#include "ino/tensor.hpp"

namespace ino {

/// Disjoint region labels of a disk cloud: the inner domain, the first
/// boundary annulus, and the remainder of the outer boundary annulus.
enum class Region : std::uint8_t { interior = 0, boundary_inner = 1, boundary_outer = 2 };

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
};

struct GridDesc {
    std::size_t rows = 0, cols = 0;
    double x0 = 0.0, y0 = 0.0;
    double dx = 0.0, dy = 0.0;
};

/// Discretization of the domain: node coordinates, quadrature weights, and
/// the reference edge that anchors local orientations.
struct PointCloud {
    Tensor coords;                      // (M, 2)
    std::vector<double> quad_weights;   // M, positive
    std::array<std::size_t, 2> ref_edge{0, 1};
    std::vector<Region> region;         // empty means all interior
    std::optional<GridDesc> grid;

    std::size_t num_nodes() const { return coords.ndim() == 2 ? coords.rows() : 0; }
    double x(std::size_t i) const { return coords[2 * i]; }
    double y(std::size_t i) const { return coords[2 * i + 1]; }
    Region region_of(std::size_t i) const { return region.empty() ? Region::interior : region[i]; }

    /// Reference vector x_{r2} - x_{r1} in the cloud's current coordinates.
    std::array<double, 2> ref_vector() const;

    void validate() const;
};

/// Rigid frame change x -> R x + g with R orthogonal (2x2, row-major).
struct FrameTransform {
    std::array<double, 4> r{1.0, 0.0, 0.0, 1.0};
    std::array<double, 2> g{0.0, 0.0};

    static FrameTransform rotation(double theta);
    static FrameTransform translation(double gx, double gy);

    std::array<double, 2> apply(double px, double py) const;
    std::array<double, 2> rotate(double vx, double vy) const;
    double det() const { return r[0] * r[3] - r[1] * r[2]; }
    bool is_orthogonal(double tol = 1e-12) const;
};

/// a then b is x -> b(a(x)).
FrameTransform compose(const FrameTransform& second, const FrameTransform& first);

enum class ChannelKind : std::uint8_t { scalar = 0, vector2 = 1 };

inline std::size_t channel_width(ChannelKind k) { return k == ChannelKind::vector2 ? 2 : 1; }

/// Which channel groups of f and u rotate with the frame.
struct ChannelLayout {
    std::vector<ChannelKind> f_groups;
    std::vector<ChannelKind> u_groups;

    std::size_t f_width() const;
    std::size_t u_width() const;

    static ChannelLayout scalar_to_scalar();        // f scalar, u scalar
    static ChannelLayout vector_bc_to_displacement();  // f = [vector2, scalar], u vector2
};

struct FunctionSample {
    Tensor f;  // (M, d_f)
    Tensor u;  // (M, d_u); may be empty for unlabeled data
};

PointCloud make_grid(std::size_t rows, std::size_t cols, const Rect& domain);

/// Square-lattice disk cloud centered at the origin, clipped to |x| <= bb_radius,
/// tagged by |x| against (omega_radius, b_radius, bb_radius]. Weights are uniform
/// and scaled so their sum equals the disk area exactly.
PointCloud make_disk(double spacing, double omega_radius, double b_radius, double bb_radius);

/// Single-region disk of the given radius.
PointCloud make_disk(double spacing, double radius);

/// Angle of v against ref in (-pi, pi]; zero-length v maps to 0 by convention.
double signed_angle(std::array<double, 2> v, std::array<double, 2> ref);

/// Frame-invariant edge features [|d| cos(theta), |d| sin(theta)] of the edge
/// d = x_j - x_i, with theta measured against the cloud's reference edge.
std::array<double, 2> invariant_edge_features(const PointCloud& cloud, std::size_t i, std::size_t j);

/// Rotates the vector2 groups of a field in place; scalar groups untouched.
Tensor transform_field(const Tensor& field, const FrameTransform& t, const std::vector<ChannelKind>& groups);

std::pair<PointCloud, FunctionSample> apply_transform(const PointCloud& cloud, const FunctionSample& sample,
                                                      const FrameTransform& t, const ChannelLayout& layout);

enum class TransformMode : std::uint8_t { translate, rotate };

/// translate: R = I, g ~ U[-C, C]^2. rotate: g = 0, theta ~ U[0, C].
FrameTransform random_transform(double C, TransformMode mode, Rng& rng);

/// Random proper rotation theta ~ U[0, rotate_C] composed with a translation
/// of magnitude U[0, translate_C] in a uniform direction.
FrameTransform random_rigid(double translate_C, double rotate_C, Rng& rng);

}  // namespace ino
