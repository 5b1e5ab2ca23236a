#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ino/geometry.hpp"
#include "ino/rng.hpp"
#include "ino/tensor.hpp"

namespace ino {

/// Truncated-Fourier random field on a square, two independent components.
/// Modes k = (k1, k2) over [k_min, k_max]^2 minus (0, 0), spectral amplitude
/// (k1^2 + k2^2)^(-decay), uniform random coefficients.
struct GrfConfig {
    int k_min = -15;
    int k_max = 13;
    double decay = 1.25;
    double domain_scale = 2.8;  // D in exp(i 2 pi k . x / D)
    Rect square{-1.4, -1.4, 1.4, 1.4};
    std::size_t grid_n = 201;  // structured-grid resolution of the interpolator
};

/// A drawn field: retained mode coefficients for exact evaluation plus the
/// structured-grid samples backing the bicubic interpolant.
class GrfField {
public:
    GrfField(GrfConfig cfg, std::vector<std::array<double, 3>> modes, Tensor coeffs);

    /// Exact truncated-sum evaluation of one component.
    double direct(int component, double px, double py) const;

    /// Bicubic (Catmull-Rom) interpolation from the structured grid.
    double interpolate(int component, double px, double py) const;

    std::array<double, 2> direct2(double px, double py) const {
        return {direct(0, px, py), direct(1, px, py)};
    }
    std::array<double, 2> interpolate2(double px, double py) const {
        return {interpolate(0, px, py), interpolate(1, px, py)};
    }

    const GrfConfig& config() const { return cfg_; }
    std::size_t num_modes() const { return modes_.size(); }

private:
    GrfConfig cfg_;
    std::vector<std::array<double, 3>> modes_;  // (k1, k2, amplitude)
    Tensor coeffs_;                             // (num_modes, 2)
    Tensor grid_;                               // (grid_n * grid_n, 2), row-major over (iy, ix)
    double h_ = 0.0;

    void fill_grid();
};

/// Draws the per-mode uniform coefficients (component 0 first, then 1).
GrfField sample_grf_bc(const GrfConfig& cfg, Rng& rng);

}  // namespace ino
