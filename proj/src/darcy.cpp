#include "ino/darcy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ino/serialize.hpp"

namespace ino {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void DarcyConfig::validate() const {
    if (fine_n < 3) throw std::invalid_argument("DarcyConfig: fine grid too small");
    for (std::size_t r : resolutions) {
        if (r < 2 || r > fine_n) throw std::invalid_argument("DarcyConfig: bad output resolution");
    }
    if (!(v_low > 0.0)) throw std::invalid_argument("DarcyConfig: conductivities must be positive");
    if (std::abs(v_high - 4.0 * v_low) > 1e-12 * v_high) {
        throw std::invalid_argument("DarcyConfig: conductivity ratio must be 4");
    }
    if (!(correlation > 0.0)) throw std::invalid_argument("DarcyConfig: correlation scale must be positive");
}

Tensor sample_conductivity(const DarcyConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t n = cfg.fine_n;
    const int K = cfg.phase_modes;
    const double kappa = 1.0 / cfg.correlation;

    Tensor field({n, n});
    std::vector<double> cx(n), sx(n);
    const double h = 1.0 / static_cast<double>(n - 1);
    for (int k1 = -K; k1 <= K; ++k1) {
        for (int k2 = -K; k2 <= K; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            const double ksq = static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
            const double amp = std::pow(kTwoPi * kTwoPi * ksq + kappa * kappa, -2.0);
            const double a = rng.normal() * amp;
            const double phi = rng.uniform(0.0, kTwoPi);
            for (std::size_t i = 0; i < n; ++i) {
                const double arg = kTwoPi * k1 * (static_cast<double>(i) * h);
                cx[i] = std::cos(arg);
                sx[i] = std::sin(arg);
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double arg = kTwoPi * k2 * (static_cast<double>(j) * h) + phi;
                const double cb = std::cos(arg), sb = std::sin(arg);
                double* row = field.data() + j * n;
                for (std::size_t i = 0; i < n; ++i) row[i] += a * (cx[i] * cb - sx[i] * sb);
            }
        }
    }

    Tensor out({n, n});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = field[i] > 0.0 ? cfg.v_high : cfg.v_low;
    return out;
}

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

Tensor solve_darcy(const Tensor& conductivity, double tol, double* residual_out) {
    if (conductivity.ndim() != 2 || conductivity.rows() != conductivity.cols() || conductivity.rows() < 3) {
        throw std::invalid_argument("solve_darcy: conductivity must be (n, n), n >= 3");
    }
    const std::size_t n = conductivity.rows();
    for (std::size_t i = 0; i < conductivity.size(); ++i) {
        if (!(conductivity[i] > 0.0)) {
            throw std::invalid_argument("solve_darcy: conductivity must be strictly positive");
        }
    }

    const std::size_t m = n - 2;  // interior nodes per axis
    const double h = 1.0 / static_cast<double>(n - 1);
    const double inv_h2 = 1.0 / (h * h);
    auto kat = [&](std::size_t ix, std::size_t iy) { return conductivity[iy * n + ix]; };

    // Face conductivities around interior node (ix, iy) = grid (ix+1, iy+1).
    std::vector<double> aw(m * m), ae(m * m), as_(m * m), an(m * m), diag(m * m);
    for (std::size_t iy = 0; iy < m; ++iy) {
        for (std::size_t ix = 0; ix < m; ++ix) {
            const std::size_t gx = ix + 1, gy = iy + 1;
            const std::size_t id = iy * m + ix;
            aw[id] = harmonic(kat(gx, gy), kat(gx - 1, gy)) * inv_h2;
            ae[id] = harmonic(kat(gx, gy), kat(gx + 1, gy)) * inv_h2;
            as_[id] = harmonic(kat(gx, gy), kat(gx, gy - 1)) * inv_h2;
            an[id] = harmonic(kat(gx, gy), kat(gx, gy + 1)) * inv_h2;
            diag[id] = aw[id] + ae[id] + as_[id] + an[id];
        }
    }

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (std::size_t iy = 0; iy < m; ++iy) {
            for (std::size_t ix = 0; ix < m; ++ix) {
                const std::size_t id = iy * m + ix;
                double v = diag[id] * x[id];
                if (ix > 0) v -= aw[id] * x[id - 1];
                if (ix + 1 < m) v -= ae[id] * x[id + 1];
                if (iy > 0) v -= as_[id] * x[id - m];
                if (iy + 1 < m) v -= an[id] * x[id + m];
                y[id] = v;
            }
        }
    };

    // Symmetric Gauss-Seidel preconditioner: (D+L) D^{-1} (D+U) z = r.
    auto precondition = [&](const std::vector<double>& r, std::vector<double>& z) {
        for (std::size_t iy = 0; iy < m; ++iy) {
            for (std::size_t ix = 0; ix < m; ++ix) {
                const std::size_t id = iy * m + ix;
                double v = r[id];
                if (ix > 0) v += aw[id] * z[id - 1];
                if (iy > 0) v += as_[id] * z[id - m];
                z[id] = v / diag[id];
            }
        }
        for (std::size_t id = 0; id < m * m; ++id) z[id] *= diag[id];
        for (std::size_t iy = m; iy-- > 0;) {
            for (std::size_t ix = m; ix-- > 0;) {
                const std::size_t id = iy * m + ix;
                double v = z[id];
                if (ix + 1 < m) v += ae[id] * z[id + 1];
                if (iy + 1 < m) v += an[id] * z[id + m];
                z[id] = v / diag[id];
            }
        }
    };

    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    const std::size_t unknowns = m * m;
    std::vector<double> x(unknowns, 0.0), r(unknowns, 1.0), z(unknowns), p(unknowns), ap(unknowns);
    const double bnorm = std::sqrt(static_cast<double>(unknowns));

    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    double rnorm = bnorm;
    const std::size_t max_iters = 50 * n;
    std::size_t it = 0;
    for (; it < max_iters && rnorm > tol * bnorm; ++it) {
        apply(p, ap);
        const double alpha = rz / dot(p, ap);
        for (std::size_t i = 0; i < unknowns; ++i) x[i] += alpha * p[i];
        for (std::size_t i = 0; i < unknowns; ++i) r[i] -= alpha * ap[i];
        rnorm = std::sqrt(dot(r, r));
        if (rnorm <= tol * bnorm) break;
        precondition(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < unknowns; ++i) p[i] = z[i] + beta * p[i];
    }
    if (residual_out) *residual_out = rnorm / bnorm;
    if (rnorm > tol * bnorm) {
        throw std::runtime_error("solve_darcy: no convergence after " + std::to_string(max_iters) +
                                 " iterations, relative residual " + std::to_string(rnorm / bnorm));
    }

    Tensor u({n, n});
    for (std::size_t iy = 0; iy < m; ++iy) {
        for (std::size_t ix = 0; ix < m; ++ix) {
            u[(iy + 1) * n + (ix + 1)] = x[iy * m + ix];
        }
    }
    return u;
}

Tensor downsample(const Tensor& fine_field, std::size_t target_n) {
    if (fine_field.ndim() != 2 || fine_field.rows() != fine_field.cols()) {
        throw std::invalid_argument("downsample: field must be (n, n)");
    }
    const std::size_t n = fine_field.rows();
    if (target_n < 2 || target_n > n) throw std::invalid_argument("downsample: bad target resolution");
    if ((n - 1) % (target_n - 1) != 0) {
        throw std::invalid_argument("downsample: grids misaligned: " + std::to_string(n) + " -> " +
                                    std::to_string(target_n) + " is not an index striding");
    }
    const std::size_t stride = (n - 1) / (target_n - 1);
    Tensor out({target_n, target_n});
    for (std::size_t j = 0; j < target_n; ++j) {
        for (std::size_t i = 0; i < target_n; ++i) {
            out[j * target_n + i] = fine_field[(j * stride) * n + (i * stride)];
        }
    }
    return out;
}

std::vector<Dataset> generate_darcy_dataset(const DarcyConfig& cfg) {
    cfg.validate();
    const std::size_t count = cfg.num_samples();

    std::vector<Dataset> out;
    for (std::size_t res : cfg.resolutions) {
        Dataset ds;
        ds.problem = "darcy";
        ds.layout = ChannelLayout::scalar_to_scalar();
        ds.cloud = std::make_shared<PointCloud>(make_grid(res, res, Rect{0.0, 0.0, 1.0, 1.0}));
        ds.seed = cfg.seed;
        nlohmann::json echo;
        echo["fine_n"] = cfg.fine_n;
        echo["resolution"] = res;
        echo["resolutions"] = cfg.resolutions;
        echo["v_high"] = cfg.v_high;
        echo["v_low"] = cfg.v_low;
        echo["correlation"] = cfg.correlation;
        echo["phase_modes"] = cfg.phase_modes;
        echo["splits"] = {cfg.n_train, cfg.n_val, cfg.n_test};
        echo["seed"] = cfg.seed;
        ds.config_echo = echo.dump();
        out.push_back(std::move(ds));
    }

    for (std::size_t s = 0; s < count; ++s) {
        Rng rng(Rng::derive(cfg.seed, s));
        const Tensor conductivity = sample_conductivity(cfg, rng);
        const Tensor u_fine = solve_darcy(conductivity, cfg.solver_tol);
        for (std::size_t r = 0; r < cfg.resolutions.size(); ++r) {
            const std::size_t res = cfg.resolutions[r];
            const Tensor fc = downsample(conductivity, res);
            const Tensor uc = downsample(u_fine, res);
            out[r].f.push_back(Tensor({res * res, 1}, std::vector<double>(fc.data(), fc.data() + fc.size())));
            out[r].u.push_back(Tensor({res * res, 1}, std::vector<double>(uc.data(), uc.data() + uc.size())));
        }
    }
    for (Dataset& ds : out) {
        ds.set_contiguous_splits(cfg.n_train, cfg.n_val, cfg.n_test);
        ds.validate();
    }
    return out;
}

}  // namespace ino
