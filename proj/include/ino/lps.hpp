#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ino/dataset.hpp"
#include "ino/grf.hpp"
#include "ino/rng.hpp"
#include "ino/tensor.hpp"

namespace ino {

struct LpsMaterial {
    double lambda_glass = 0.0;
    double mu_glass = 0.0;
    double lambda_crystal = 0.0;
    double mu_crystal = 0.0;

    void validate() const;
};

/// Linear peridynamic solid on a disk: horizon-ball quadrature, nonlocal
/// dilatation, kernel K(r) = 1/r, nonlocal volume m(delta) = 2 pi delta^3 / 3.
struct LpsConfig {
    double horizon = 0.3;
    double omega_radius = 0.4;
    double b_radius = 0.7;
    double bb_radius = 1.0;
    double spacing = 0.05;
    std::optional<LpsMaterial> material;  // must be supplied explicitly
    double crystal_fraction = 0.4;
    double micro_correlation = 0.25;  // microstructure field length scale
    int micro_modes = 12;
    GrfConfig bc;
    std::size_t n_train = 100, n_val = 40, n_test = 40;
    std::uint64_t seed = 0;
    double solver_tol = 1e-10;

    std::size_t num_samples() const { return n_train + n_val + n_test; }
    void validate() const;
};

double lps_nonlocal_volume(double horizon);  // m(delta)

/// Horizon-ball neighbor structure over a disk cloud (0 < |y - x| <= delta).
struct LpsNeighborhoods {
    std::vector<std::int64_t> offsets;  // per node
    std::vector<std::int32_t> nbr;
    std::vector<double> ex, ey;      // unit bond vector (y - x)/r
    std::vector<double> inv_r;       // 1/r
    std::vector<double> w;           // quadrature weight of y
};

LpsNeighborhoods build_lps_neighborhoods(const PointCloud& cloud, double horizon);

/// Crystal indicator per node (1 = crystal, 0 = glass). The phase field is a
/// random Fourier field quantile-thresholded to the configured fraction.
std::vector<int> sample_microstructure(const LpsConfig& cfg, const PointCloud& cloud, Rng& rng);

/// Discrete nonlocal dilatation at every node of |x| <= b_radius given a full
/// displacement field u (M x 2); other nodes get 0.
std::vector<double> lps_dilatation(const LpsConfig& cfg, const PointCloud& cloud,
                                   const LpsNeighborhoods& nb, const Tensor& u);

/// Solves for interior displacements given boundary data on the annuli; u_bc
/// must be (M, 2) with meaningful values at every non-interior node. Returns
/// the full displacement field (interior solved, boundary copied).
Tensor solve_lps(const LpsConfig& cfg, const PointCloud& cloud, const std::vector<int>& phase,
                 const Tensor& u_bc, double* residual_out = nullptr);

Dataset generate_lps_dataset(const LpsConfig& cfg);

}  // namespace ino
