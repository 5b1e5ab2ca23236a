#include "ino/lps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ino/serialize.hpp"

namespace ino {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

void LpsMaterial::validate() const {
    if (!(mu_glass > 0.0) || !(mu_crystal > 0.0)) {
        throw std::invalid_argument("LpsMaterial: shear moduli must be positive");
    }
    if (lambda_glass < 0.0 || lambda_crystal < 0.0) {
        throw std::invalid_argument("LpsMaterial: Lame parameters must be non-negative");
    }
}

void LpsConfig::validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("LpsConfig: horizon must be positive");
    if (!(omega_radius < b_radius && b_radius < bb_radius)) {
        throw std::invalid_argument("LpsConfig: radii must be strictly increasing");
    }
    if (omega_radius + horizon > b_radius + 1e-9) {
        throw std::invalid_argument("LpsConfig: inner boundary annulus thinner than the horizon");
    }
    if (b_radius + horizon > bb_radius + 1e-9) {
        throw std::invalid_argument("LpsConfig: outer boundary annulus thinner than the horizon");
    }
    if (!(spacing > 0.0) || spacing > omega_radius) {
        throw std::invalid_argument("LpsConfig: spacing must be in (0, omega_radius]");
    }
    if (!(crystal_fraction > 0.0 && crystal_fraction < 1.0)) {
        throw std::invalid_argument("LpsConfig: crystal volume fraction must be in (0, 1)");
    }
    if (!material) {
        throw std::invalid_argument(
            "LpsConfig: material moduli must be supplied explicitly (no defaults are assumed)");
    }
    material->validate();
}

double lps_nonlocal_volume(double horizon) { return kTwoPi * horizon * horizon * horizon / 3.0; }

LpsNeighborhoods build_lps_neighborhoods(const PointCloud& cloud, double horizon) {
    const std::size_t m = cloud.num_nodes();
    LpsNeighborhoods nb;
    nb.offsets.assign(m + 1, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const double xi = cloud.x(i), yi = cloud.y(i);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double dx = cloud.x(j) - xi;
            const double dy = cloud.y(j) - yi;
            const double r = std::hypot(dx, dy);
            if (r > horizon || r == 0.0) continue;
            nb.nbr.push_back(static_cast<std::int32_t>(j));
            nb.ex.push_back(dx / r);
            nb.ey.push_back(dy / r);
            nb.inv_r.push_back(1.0 / r);
            nb.w.push_back(cloud.quad_weights[j]);
        }
        nb.offsets[i + 1] = static_cast<std::int64_t>(nb.nbr.size());
    }
    return nb;
}

std::vector<int> sample_microstructure(const LpsConfig& cfg, const PointCloud& cloud, Rng& rng) {
    const std::size_t m = cloud.num_nodes();
    const int K = cfg.micro_modes;
    const double kappa = 1.0 / cfg.micro_correlation;
    const double domain = 2.0 * cfg.bb_radius;

    std::vector<double> field(m, 0.0);
    for (int k1 = -K; k1 <= K; ++k1) {
        for (int k2 = -K; k2 <= K; ++k2) {
            if (k1 == 0 && k2 == 0) continue;
            const double ksq = static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
            const double amp = std::pow(kTwoPi * kTwoPi * ksq / (domain * domain) + kappa * kappa, -2.0);
            const double a = rng.normal() * amp;
            const double phi = rng.uniform(0.0, kTwoPi);
            for (std::size_t i = 0; i < m; ++i) {
                const double arg = kTwoPi * (k1 * cloud.x(i) + k2 * cloud.y(i)) / domain + phi;
                field[i] += a * std::cos(arg);
            }
        }
    }

    // Quantile threshold: exactly the configured fraction lands in the crystal
    // phase (up to ties, which the continuous field avoids).
    std::vector<double> sorted = field;
    std::sort(sorted.begin(), sorted.end());
    const auto cut = static_cast<std::size_t>(std::floor((1.0 - cfg.crystal_fraction) * static_cast<double>(m)));
    const double threshold = sorted[std::min(cut, m - 1)];
    std::vector<int> phase(m, 0);
    for (std::size_t i = 0; i < m; ++i) phase[i] = field[i] >= threshold ? 1 : 0;
    return phase;
}

namespace {

struct LpsOperator {
    const LpsConfig* cfg;
    const PointCloud* cloud;
    const LpsNeighborhoods* nb;
    const std::vector<int>* phase;
    std::vector<std::size_t> interior;  // equation rows
    std::vector<std::size_t> dil_nodes; // nodes carrying a dilatation value
    double inv_m = 0.0;

    double mu_of(std::size_t i) const {
        return (*phase)[i] ? cfg->material->mu_crystal : cfg->material->mu_glass;
    }
    double lambda_of(std::size_t i) const {
        return (*phase)[i] ? cfg->material->lambda_crystal : cfg->material->lambda_glass;
    }

    // d(x) on dil_nodes; zero elsewhere. u is the full (M, 2) field.
    void dilatation(const Tensor& u, std::vector<double>& d) const {
        d.assign(cloud->num_nodes(), 0.0);
        for (std::size_t x : dil_nodes) {
            const double ux = u[2 * x], uy = u[2 * x + 1];
            double s = 0.0;
            for (std::int64_t e = nb->offsets[x]; e < nb->offsets[x + 1]; ++e) {
                const auto y = static_cast<std::size_t>(nb->nbr[e]);
                s += nb->w[e] * (nb->ex[e] * (u[2 * y] - ux) + nb->ey[e] * (u[2 * y + 1] - uy));
            }
            d[x] = inv_m * s;
        }
    }

    // L_delta u at interior rows (2 components each), given the full field.
    void force(const Tensor& u, const std::vector<double>& d, std::vector<double>& out) const {
        out.assign(2 * interior.size(), 0.0);
        for (std::size_t row = 0; row < interior.size(); ++row) {
            const std::size_t x = interior[row];
            const double ux = u[2 * x], uy = u[2 * x + 1];
            double fx = 0.0, fy = 0.0;
            for (std::int64_t e = nb->offsets[x]; e < nb->offsets[x + 1]; ++e) {
                const auto y = static_cast<std::size_t>(nb->nbr[e]);
                const double mu_bar = 0.5 * (mu_of(x) + mu_of(y));
                const double lam_bar = 0.5 * (lambda_of(x) + lambda_of(y));
                const double dsum = d[x] + d[y];
                const double dux = u[2 * y] - ux;
                const double duy = u[2 * y + 1] - uy;
                const double en = nb->ex[e] * dux + nb->ey[e] * duy;
                const double c1 = nb->w[e] * (lam_bar - mu_bar) * dsum;
                const double c2 = 8.0 * nb->w[e] * mu_bar * nb->inv_r[e] * en;
                fx -= c1 * nb->ex[e] + c2 * nb->ex[e];
                fy -= c1 * nb->ey[e] + c2 * nb->ey[e];
            }
            out[2 * row] = inv_m * fx;
            out[2 * row + 1] = inv_m * fy;
        }
    }

    void apply_full(const Tensor& u, std::vector<double>& out, std::vector<double>& scratch_d) const {
        dilatation(u, scratch_d);
        force(u, scratch_d, out);
    }
};

LpsOperator make_operator(const LpsConfig& cfg, const PointCloud& cloud, const LpsNeighborhoods& nb,
                          const std::vector<int>& phase) {
    LpsOperator op;
    op.cfg = &cfg;
    op.cloud = &cloud;
    op.nb = &nb;
    op.phase = &phase;
    op.inv_m = 1.0 / lps_nonlocal_volume(cfg.horizon);
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        const Region r = cloud.region_of(i);
        if (r == Region::interior) op.interior.push_back(i);
        if (r == Region::interior || r == Region::boundary_inner) op.dil_nodes.push_back(i);
    }
    for (std::size_t x : op.dil_nodes) {
        if (nb.offsets[x + 1] == nb.offsets[x]) {
            throw std::runtime_error("solve_lps: node " + std::to_string(x) +
                                     " has an empty horizon neighborhood");
        }
    }
    return op;
}

}  // namespace

std::vector<double> lps_dilatation(const LpsConfig& cfg, const PointCloud& cloud,
                                   const LpsNeighborhoods& nb, const Tensor& u) {
    if (u.ndim() != 2 || u.rows() != cloud.num_nodes() || u.cols() != 2) {
        throw std::invalid_argument("lps_dilatation: u must be (M, 2)");
    }
    std::vector<int> phase(cloud.num_nodes(), 0);
    LpsConfig local = cfg;
    if (!local.material) local.material = LpsMaterial{1.0, 1.0, 1.0, 1.0};  // moduli do not enter d
    LpsOperator op = make_operator(local, cloud, nb, phase);
    std::vector<double> d;
    op.dilatation(u, d);
    return d;
}

Tensor solve_lps(const LpsConfig& cfg, const PointCloud& cloud, const std::vector<int>& phase,
                 const Tensor& u_bc, double* residual_out) {
    cfg.validate();
    cloud.validate();
    if (cloud.region.empty()) throw std::invalid_argument("solve_lps: cloud has no region tags");
    if (phase.size() != cloud.num_nodes()) throw std::invalid_argument("solve_lps: phase size mismatch");
    if (u_bc.ndim() != 2 || u_bc.rows() != cloud.num_nodes() || u_bc.cols() != 2) {
        throw std::invalid_argument("solve_lps: u_bc must be (M, 2)");
    }

    const LpsNeighborhoods nb = build_lps_neighborhoods(cloud, cfg.horizon);
    LpsOperator op = make_operator(cfg, cloud, nb, phase);
    const std::size_t m = cloud.num_nodes();
    const std::size_t n_unknown = 2 * op.interior.size();
    if (n_unknown == 0) throw std::runtime_error("solve_lps: no interior nodes");

    // Full field with boundary data and zeroed interior: the affine part.
    Tensor u_b({m, 2});
    for (std::size_t i = 0; i < m; ++i) {
        if (cloud.region_of(i) != Region::interior) {
            u_b[2 * i] = u_bc[2 * i];
            u_b[2 * i + 1] = u_bc[2 * i + 1];
        }
    }

    std::vector<double> d_scratch, b(n_unknown), ax(n_unknown);
    op.apply_full(u_b, b, d_scratch);
    for (double& v : b) v = -v;

    Tensor u_x({m, 2});  // interior-only field for operator applications
    auto apply_interior = [&](const std::vector<double>& x, std::vector<double>& out) {
        for (std::size_t i = 0; i < u_x.size(); ++i) u_x[i] = 0.0;
        for (std::size_t row = 0; row < op.interior.size(); ++row) {
            u_x[2 * op.interior[row]] = x[2 * row];
            u_x[2 * op.interior[row] + 1] = x[2 * row + 1];
        }
        op.apply_full(u_x, out, d_scratch);
    };

    auto dot = [](const std::vector<double>& a, const std::vector<double>& b2) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b2[i];
        return s;
    };

    std::vector<double> x(n_unknown, 0.0), r = b, p = b;
    const double bnorm = std::sqrt(dot(b, b));
    double rnorm = bnorm;
    if (bnorm > 0.0) {
        double rr = dot(r, r);
        const std::size_t max_iters = 20000;
        std::size_t it = 0;
        for (; it < max_iters && rnorm > cfg.solver_tol * bnorm; ++it) {
            apply_interior(p, ax);
            const double pap = dot(p, ax);
            if (!(pap > 0.0)) {
                throw std::runtime_error("solve_lps: system lost positive definiteness (insufficient "
                                         "constraints or unstable moduli)");
            }
            const double alpha = rr / pap;
            for (std::size_t i = 0; i < n_unknown; ++i) x[i] += alpha * p[i];
            for (std::size_t i = 0; i < n_unknown; ++i) r[i] -= alpha * ax[i];
            const double rr_new = dot(r, r);
            rnorm = std::sqrt(rr_new);
            if (rnorm <= cfg.solver_tol * bnorm) break;
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < n_unknown; ++i) p[i] = r[i] + beta * p[i];
        }
        if (rnorm > cfg.solver_tol * bnorm) {
            throw std::runtime_error("solve_lps: no convergence, relative residual " +
                                     std::to_string(rnorm / bnorm));
        }
    }
    if (residual_out) *residual_out = bnorm > 0.0 ? rnorm / bnorm : 0.0;

    Tensor u = u_b;
    for (std::size_t row = 0; row < op.interior.size(); ++row) {
        u[2 * op.interior[row]] = x[2 * row];
        u[2 * op.interior[row] + 1] = x[2 * row + 1];
    }
    return u;
}

Dataset generate_lps_dataset(const LpsConfig& cfg) {
    cfg.validate();
    auto cloud = std::make_shared<PointCloud>(
        make_disk(cfg.spacing, cfg.omega_radius, cfg.b_radius, cfg.bb_radius));
    const std::size_t m = cloud->num_nodes();

    Dataset ds;
    ds.problem = "lps";
    ds.layout = ChannelLayout::vector_bc_to_displacement();
    ds.cloud = cloud;
    ds.seed = cfg.seed;
    {
        nlohmann::json echo;
        echo["horizon"] = cfg.horizon;
        echo["radii"] = {cfg.omega_radius, cfg.b_radius, cfg.bb_radius};
        echo["spacing"] = cfg.spacing;
        echo["material"] = {{"lambda_glass", cfg.material->lambda_glass},
                            {"mu_glass", cfg.material->mu_glass},
                            {"lambda_crystal", cfg.material->lambda_crystal},
                            {"mu_crystal", cfg.material->mu_crystal}};
        echo["crystal_fraction"] = cfg.crystal_fraction;
        echo["micro_correlation"] = cfg.micro_correlation;
        echo["splits"] = {cfg.n_train, cfg.n_val, cfg.n_test};
        echo["seed"] = cfg.seed;
        ds.config_echo = echo.dump();
    }

    for (std::size_t s = 0; s < cfg.num_samples(); ++s) {
        Rng rng(Rng::derive(cfg.seed, s));
        const std::vector<int> phase = sample_microstructure(cfg, *cloud, rng);
        const GrfField bc = sample_grf_bc(cfg.bc, rng);

        Tensor u_bc({m, 2});
        for (std::size_t i = 0; i < m; ++i) {
            if (cloud->region_of(i) == Region::interior) continue;
            const auto v = bc.interpolate2(cloud->x(i), cloud->y(i));
            u_bc[2 * i] = v[0];
            u_bc[2 * i + 1] = v[1];
        }

        const Tensor u = solve_lps(cfg, *cloud, phase, u_bc);

        Tensor f({m, 3});
        for (std::size_t i = 0; i < m; ++i) {
            f.at(i, 0) = u_bc[2 * i];
            f.at(i, 1) = u_bc[2 * i + 1];
            f.at(i, 2) = static_cast<double>(phase[i]);
        }
        ds.f.push_back(std::move(f));
        ds.u.push_back(u);
    }
    ds.set_contiguous_splits(cfg.n_train, cfg.n_val, cfg.n_test);
    ds.validate();
    return ds;
}

}  // namespace ino
