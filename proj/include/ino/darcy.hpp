#pragma once

#include <cstdint>
#include <vector>

#include "ino/dataset.hpp"
#include "ino/rng.hpp"
#include "ino/tensor.hpp"

namespace ino {

/// Two-phase Darcy flow data on the unit square: random piecewise-constant
/// conductivity with value ratio 4, unit source, zero Dirichlet boundary.
struct DarcyConfig {
    std::size_t fine_n = 241;                     // fine-grid nodes per axis
    std::vector<std::size_t> resolutions = {16, 31};
    double v_high = 12.0;
    double v_low = 3.0;
    double correlation = 1.0 / 3.0;               // phase-field correlation scale
    int phase_modes = 16;                         // wavenumber cutoff of the phase field
    std::size_t n_train = 100, n_val = 40, n_test = 40;
    std::uint64_t seed = 0;
    double solver_tol = 1e-10;

    std::size_t num_samples() const { return n_train + n_val + n_test; }
    void validate() const;
};

/// Mean-zero random field thresholded at zero; (fine_n, fine_n) node values
/// in {v_high, v_low}.
Tensor sample_conductivity(const DarcyConfig& cfg, Rng& rng);

/// Five-point conservative finite differences with harmonic-mean face
/// conductivities; returns u on the full grid (zeros on the boundary).
/// conductivity must be (n, n) nodal values, strictly positive.
Tensor solve_darcy(const Tensor& conductivity, double tol = 1e-10, double* residual_out = nullptr);

/// Nearest-node subsampling; requires (fine_n - 1) divisible by (target - 1).
Tensor downsample(const Tensor& fine_field, std::size_t target_n);

/// One dataset per requested output resolution, same samples in each.
std::vector<Dataset> generate_darcy_dataset(const DarcyConfig& cfg);

}  // namespace ino
