#include "ino/grf.hpp"

#include <cmath>
#include <stdexcept>

namespace ino {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

GrfField::GrfField(GrfConfig cfg, std::vector<std::array<double, 3>> modes, Tensor coeffs)
    : cfg_(cfg), modes_(std::move(modes)), coeffs_(std::move(coeffs)) {
    if (cfg_.grid_n < 4) throw std::invalid_argument("GrfField: interpolation grid too small");
    fill_grid();
}

double GrfField::direct(int component, double px, double py) const {
    double s = 0.0;
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        const double phase = kTwoPi * (modes_[m][0] * px + modes_[m][1] * py) / cfg_.domain_scale;
        s += modes_[m][2] * coeffs_.at(m, static_cast<std::size_t>(component)) * std::cos(phase);
    }
    return s;
}

void GrfField::fill_grid() {
    const std::size_t n = cfg_.grid_n;
    h_ = cfg_.square.width() / static_cast<double>(n - 1);
    grid_ = Tensor({n * n, 2});

    // Separable evaluation: cos(a + b) = cos a cos b - sin a sin b with
    // a = 2 pi k1 x / D and b = 2 pi k2 y / D, so the inner loop is FMA-only.
    std::vector<double> cx(n), sx(n);
    for (std::size_t m = 0; m < modes_.size(); ++m) {
        const double k1 = modes_[m][0], k2 = modes_[m][1];
        const double a0 = coeffs_.at(m, 0) * modes_[m][2];
        const double a1 = coeffs_.at(m, 1) * modes_[m][2];
        for (std::size_t i = 0; i < n; ++i) {
            const double px = cfg_.square.x0 + static_cast<double>(i) * h_;
            const double a = kTwoPi * k1 * px / cfg_.domain_scale;
            cx[i] = std::cos(a);
            sx[i] = std::sin(a);
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double py = cfg_.square.y0 + static_cast<double>(j) * h_;
            const double b = kTwoPi * k2 * py / cfg_.domain_scale;
            const double cb = std::cos(b), sb = std::sin(b);
            double* row = grid_.data() + j * n * 2;
            for (std::size_t i = 0; i < n; ++i) {
                const double basis = cx[i] * cb - sx[i] * sb;
                row[2 * i] += a0 * basis;
                row[2 * i + 1] += a1 * basis;
            }
        }
    }
}

namespace {

// Catmull-Rom weights for normalized offset t in [0, 1].
std::array<double, 4> catmull_rom(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {-0.5 * t3 + t2 - 0.5 * t, 1.5 * t3 - 2.5 * t2 + 1.0, -1.5 * t3 + 2.0 * t2 + 0.5 * t,
            0.5 * t3 - 0.5 * t2};
}

}  // namespace

double GrfField::interpolate(int component, double px, double py) const {
    const Rect& sq = cfg_.square;
    if (px < sq.x0 - 1e-12 || px > sq.x1 + 1e-12 || py < sq.y0 - 1e-12 || py > sq.y1 + 1e-12) {
        throw std::invalid_argument("GrfField::interpolate: point outside the sampling square");
    }
    const auto n = static_cast<std::ptrdiff_t>(cfg_.grid_n);
    const double fx = (px - sq.x0) / h_;
    const double fy = (py - sq.y0) / h_;
    auto cell = [&](double f) {
        auto i = static_cast<std::ptrdiff_t>(std::floor(f));
        if (i < 0) i = 0;
        if (i > n - 2) i = n - 2;
        return i;
    };
    const std::ptrdiff_t ix = cell(fx), iy = cell(fy);
    const auto wx = catmull_rom(fx - static_cast<double>(ix));
    const auto wy = catmull_rom(fy - static_cast<double>(iy));

    auto clamp = [&](std::ptrdiff_t i) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
    double s = 0.0;
    for (int dy = -1; dy <= 2; ++dy) {
        const std::ptrdiff_t j = clamp(iy + dy);
        double row = 0.0;
        for (int dx = -1; dx <= 2; ++dx) {
            const std::ptrdiff_t i = clamp(ix + dx);
            row += wx[static_cast<std::size_t>(dx + 1)] *
                   grid_[static_cast<std::size_t>((j * n + i) * 2 + component)];
        }
        s += wy[static_cast<std::size_t>(dy + 1)] * row;
    }
    return s;
}

GrfField sample_grf_bc(const GrfConfig& cfg, Rng& rng) {
    if (cfg.k_min > cfg.k_max) throw std::invalid_argument("sample_grf_bc: empty wavenumber range");
    std::vector<std::array<double, 3>> modes;
    for (int k1 = cfg.k_min; k1 <= cfg.k_max; ++k1) {
        for (int k2 = cfg.k_min; k2 <= cfg.k_max; ++k2) {
            if (k1 == 0 && k2 == 0) continue;  // undefined amplitude, excluded
            const double ksq = static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
            modes.push_back({static_cast<double>(k1), static_cast<double>(k2), std::pow(ksq, -cfg.decay)});
        }
    }
    Tensor coeffs({modes.size(), 2});
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t m = 0; m < modes.size(); ++m) coeffs.at(m, c) = rng.uniform();
    }
    return GrfField(cfg, std::move(modes), std::move(coeffs));
}

}  // namespace ino
