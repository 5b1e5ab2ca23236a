#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ino/darcy.hpp"
#include "ino/dataset.hpp"
#include "ino/grf.hpp"
#include "ino/lps.hpp"

using namespace ino;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Series solution of -lap u = 1 on the unit square with zero boundary:
// u(x, y) = sum_{m,n odd} 16 sin(m pi x) sin(n pi y) / (pi^4 m n (m^2 + n^2)).
double poisson_series(double x, double y, int terms = 399) {
    double s = 0.0;
    for (int m = terms; m >= 1; m -= 2) {
        for (int n = terms; n >= 1; n -= 2) {
            const double mn = static_cast<double>(m) * n;
            s += 16.0 * std::sin(m * kPi * x) * std::sin(n * kPi * y) /
                 (kPi * kPi * kPi * kPi * mn * (static_cast<double>(m) * m + static_cast<double>(n) * n));
        }
    }
    return s;
}

double grid_value(const Tensor& field, std::size_t n, double x, double y) {
    const auto i = static_cast<std::size_t>(std::lround(x * static_cast<double>(n - 1)));
    const auto j = static_cast<std::size_t>(std::lround(y * static_cast<double>(n - 1)));
    return field[j * n + i];
}

double rms_diff(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.size()));
}

LpsConfig lps_test_config(double spacing = 0.05) {
    LpsConfig cfg;
    cfg.spacing = spacing;
    cfg.material = LpsMaterial{2.0, 1.0, 4.0, 2.0};
    cfg.n_train = 1;
    cfg.n_val = 1;
    cfg.n_test = 1;
    return cfg;
}

}  // namespace

TEST_CASE("conductivity fields are two-valued with ratio 4") {
    DarcyConfig cfg;
    cfg.fine_n = 33;
    Rng rng(5);
    double positive_fraction_sum = 0.0;
    for (int s = 0; s < 100; ++s) {
        const Tensor k = sample_conductivity(cfg, rng);
        std::set<double> values(k.values().begin(), k.values().end());
        REQUIRE(values.size() == 2);
        CHECK(*values.rbegin() == doctest::Approx(4.0 * *values.begin()));
        double frac = 0.0;
        for (double v : k.values()) frac += v == cfg.v_high ? 1.0 : 0.0;
        positive_fraction_sum += frac / static_cast<double>(k.size());
    }
    CHECK(std::abs(positive_fraction_sum / 100.0 - 0.5) <= 0.1);
}

TEST_CASE("darcy solver matches the series oracle for constant conductivity") {
    const std::size_t n = 241;
    const Tensor u = solve_darcy(Tensor::full({n, n}, 1.0));
    const double oracle = poisson_series(0.5, 0.5);
    CHECK(oracle == doctest::Approx(0.0736713).epsilon(2e-5));
    CHECK(std::abs(grid_value(u, n, 0.5, 0.5) - oracle) <= 2e-4);
    CHECK(std::abs(grid_value(u, n, 0.25, 0.25) - poisson_series(0.25, 0.25)) <= 2e-4);

    // zero boundary and interior positivity (maximum principle)
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(u[i] == 0.0);
        CHECK(u[(n - 1) * n + i] == 0.0);
    }
    for (double v : u.values()) CHECK(v >= 0.0);
}

TEST_CASE("darcy solver is linear in the conductivity scale") {
    const std::size_t n = 41;
    Rng rng(9);
    DarcyConfig cfg;
    cfg.fine_n = n;
    const Tensor k = sample_conductivity(cfg, rng);
    Tensor k2 = k;
    for (std::size_t i = 0; i < k2.size(); ++i) k2[i] *= 2.5;
    const Tensor u1 = solve_darcy(k);
    const Tensor u2 = solve_darcy(k2);
    for (std::size_t i = 0; i < u1.size(); ++i) {
        CHECK(u2[i] == doctest::Approx(u1[i] / 2.5).epsilon(1e-8));
    }
}

TEST_CASE("darcy solver shows second-order convergence on a smooth coefficient") {
    auto smooth = [](std::size_t n) {
        Tensor k({n, n});
        const double h = 1.0 / static_cast<double>(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                const double x = i * h, y = j * h;
                k[j * n + i] = 1.5 + std::sin(2 * kPi * x) * std::cos(2 * kPi * y) * 0.4;
            }
        }
        return k;
    };
    const Tensor u61 = solve_darcy(smooth(61));
    const Tensor u121 = solve_darcy(smooth(121));
    const Tensor u241 = solve_darcy(smooth(241));
    // successive differences on the common 61-grid nodes
    const Tensor d1 = downsample(u121, 61);
    const Tensor d2 = downsample(u241, 61);
    const double e1 = rms_diff(u61, d1);
    const double e2 = rms_diff(d1, d2);
    const double order = std::log2(e1 / e2);
    CHECK(order >= 1.7);
    CHECK(order <= 2.3);
}

TEST_CASE("darcy solver rejects non-positive conductivity") {
    Tensor k = Tensor::full({5, 5}, 1.0);
    k[7] = 0.0;
    CHECK_THROWS_AS(solve_darcy(k), std::invalid_argument);
}

TEST_CASE("downsampling is index striding") {
    const std::size_t n = 241;
    Tensor field({n, n});
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) field[j * n + i] = 1000.0 * j + i;
    }
    SUBCASE("identity at the same resolution") {
        const Tensor same = downsample(field, n);
        for (std::size_t i = 0; i < field.size(); ++i) CHECK(same[i] == field[i]);
    }
    SUBCASE("constants stay constant") {
        const Tensor c = downsample(Tensor::full({n, n}, 3.25), 16);
        for (double v : c.values()) CHECK(v == 3.25);
    }
    SUBCASE("index maps match coordinate lookup") {
        for (std::size_t target : {16ul, 31ul}) {
            const Tensor coarse = downsample(field, target);
            const std::size_t stride = (n - 1) / (target - 1);
            for (std::size_t j = 0; j < target; ++j) {
                for (std::size_t i = 0; i < target; ++i) {
                    // the coarse node (i, j) sits at fine coordinates (i*stride, j*stride)
                    CHECK(coarse[j * target + i] == 1000.0 * (j * stride) + i * stride);
                }
            }
        }
    }
    SUBCASE("misaligned grids are rejected") {
        CHECK_THROWS_AS(downsample(field, 18), std::invalid_argument);
    }
}

TEST_CASE("grf boundary fields") {
    GrfConfig cfg;
    SUBCASE("mode count excludes (0,0)") {
        // k1, k2 each range over the 29 integers -15..13
        Rng rng(3);
        const GrfField field = sample_grf_bc(cfg, rng);
        CHECK(field.num_modes() == 29 * 29 - 1);
    }
    SUBCASE("zero coefficients give the zero field") {
        std::vector<std::array<double, 3>> modes{{1.0, 0.0, 1.0}, {0.0, 1.0, 1.0}};
        const GrfField field(cfg, modes, Tensor({2, 2}));
        CHECK(field.direct(0, 0.3, -0.2) == 0.0);
        CHECK(field.interpolate(0, 0.3, -0.2) == 0.0);
        CHECK(field.interpolate(1, -1.0, 1.0) == 0.0);
    }
    SUBCASE("bicubic interpolation tracks the direct sum") {
        Rng rng(11);
        const GrfField field = sample_grf_bc(cfg, rng);
        const double h = cfg.square.width() / static_cast<double>(cfg.grid_n - 1);
        Rng probe(13);
        double scale = 0.0;
        for (int t = 0; t < 50; ++t) {
            scale = std::max(scale, std::abs(field.direct(0, probe.uniform(-1.0, 1.0),
                                                          probe.uniform(-1.0, 1.0))));
        }
        for (int t = 0; t < 50; ++t) {
            // probe at half-spacing offsets from grid nodes, inside the annulus region
            const double px = std::floor(probe.uniform(-1.0, 1.0) / h) * h + 0.5 * h;
            const double py = std::floor(probe.uniform(-1.0, 1.0) / h) * h + 0.5 * h;
            for (int comp = 0; comp < 2; ++comp) {
                const double exact = field.direct(comp, px, py);
                const double interp = field.interpolate(comp, px, py);
                CHECK(std::abs(interp - exact) <= 1e-3 * scale);
            }
        }
    }
    SUBCASE("evaluation outside the square is rejected") {
        Rng rng(4);
        const GrfField field = sample_grf_bc(cfg, rng);
        CHECK_THROWS_AS(field.interpolate(0, 1.7, 0.0), std::invalid_argument);
    }
}

TEST_CASE("lps nonlocal volume") {
    CHECK(lps_nonlocal_volume(0.3) == doctest::Approx(0.0565487).epsilon(1e-5));
    CHECK(lps_nonlocal_volume(0.3) == doctest::Approx(2.0 * kPi * 0.027 / 3.0).epsilon(1e-15));
}

TEST_CASE("lps reproduces rigid translations exactly") {
    const LpsConfig cfg = lps_test_config(0.05);
    const PointCloud cloud = make_disk(cfg.spacing, cfg.omega_radius, cfg.b_radius, cfg.bb_radius);
    Rng rng(8);
    const std::vector<int> phase = sample_microstructure(cfg, cloud, rng);

    Tensor u_bc({cloud.num_nodes(), 2});
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        u_bc.at(i, 0) = 0.37;
        u_bc.at(i, 1) = -0.21;
    }
    const Tensor u = solve_lps(cfg, cloud, phase, u_bc);
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        CHECK(std::abs(u.at(i, 0) - 0.37) <= 1e-8);
        CHECK(std::abs(u.at(i, 1) + 0.21) <= 1e-8);
    }
}

TEST_CASE("discrete dilatation vanishes on infinitesimal rotations") {
    const LpsConfig cfg = lps_test_config(0.05);
    const PointCloud cloud = make_disk(cfg.spacing, cfg.omega_radius, cfg.b_radius, cfg.bb_radius);
    const LpsNeighborhoods nb = build_lps_neighborhoods(cloud, cfg.horizon);

    Tensor u({cloud.num_nodes(), 2});
    const double eps = 1e-3;
    for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
        u.at(i, 0) = -eps * cloud.y(i);
        u.at(i, 1) = eps * cloud.x(i);
    }
    const std::vector<double> d = lps_dilatation(cfg, cloud, nb, u);
    double worst = 0.0;
    for (double v : d) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 1e-6);
}

TEST_CASE("lps microstructure hits the requested volume fraction") {
    const LpsConfig cfg = lps_test_config(0.05);
    const PointCloud cloud = make_disk(cfg.spacing, cfg.omega_radius, cfg.b_radius, cfg.bb_radius);
    Rng rng(77);
    const std::vector<int> phase = sample_microstructure(cfg, cloud, rng);
    double frac = 0.0;
    for (int p : phase) frac += p;
    frac /= static_cast<double>(phase.size());
    CHECK(std::abs(frac - 0.4) <= 0.01);
}

TEST_CASE("lps requires explicit moduli and non-empty neighborhoods") {
    LpsConfig cfg = lps_test_config();
    cfg.material.reset();
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("moduli"), std::invalid_argument);

    LpsConfig tiny = lps_test_config(0.2);
    tiny.horizon = 0.05;  // smaller than the spacing: no neighbors in the ball
    tiny.b_radius = 0.45;
    tiny.bb_radius = 0.5;
    const PointCloud cloud = make_disk(tiny.spacing, tiny.omega_radius, tiny.b_radius, tiny.bb_radius);
    std::vector<int> phase(cloud.num_nodes(), 0);
    Tensor u_bc({cloud.num_nodes(), 2});
    CHECK_THROWS_WITH_AS(solve_lps(tiny, cloud, phase, u_bc), doctest::Contains("neighborhood"),
                         std::runtime_error);
}

TEST_CASE("generators are deterministic in the seed") {
    SUBCASE("darcy") {
        DarcyConfig cfg;
        cfg.fine_n = 33;
        cfg.resolutions = {5, 9};
        cfg.n_train = 2;
        cfg.n_val = 1;
        cfg.n_test = 1;
        cfg.seed = 123;
        const auto a = generate_darcy_dataset(cfg);
        const auto b = generate_darcy_dataset(cfg);
        REQUIRE(a.size() == 2);
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t s = 0; s < a[r].num_samples(); ++s) {
                for (std::size_t i = 0; i < a[r].f[s].size(); ++i) {
                    CHECK(a[r].f[s][i] == b[r].f[s][i]);
                    CHECK(a[r].u[s][i] == b[r].u[s][i]);
                }
                for (double v : a[r].u[s].values()) CHECK(v >= 0.0);
            }
        }
    }
    SUBCASE("lps") {
        LpsConfig cfg = lps_test_config(0.08);
        cfg.n_train = 1;
        cfg.n_val = 1;
        cfg.n_test = 1;
        cfg.seed = 9;
        const Dataset a = generate_lps_dataset(cfg);
        const Dataset b = generate_lps_dataset(cfg);
        REQUIRE(a.num_samples() == 3);
        for (std::size_t s = 0; s < a.num_samples(); ++s) {
            for (std::size_t i = 0; i < a.f[s].size(); ++i) CHECK(a.f[s][i] == b.f[s][i]);
            for (std::size_t i = 0; i < a.u[s].size(); ++i) CHECK(a.u[s][i] == b.u[s][i]);
        }
        // input channels: padded boundary displacement plus {0,1} microstructure
        for (std::size_t i = 0; i < a.cloud->num_nodes(); ++i) {
            const double m = a.f[0].at(i, 2);
            CHECK((m == 0.0 || m == 1.0));
            if (a.cloud->region_of(i) == Region::interior) {
                CHECK(a.f[0].at(i, 0) == 0.0);
                CHECK(a.f[0].at(i, 1) == 0.0);
            }
        }
    }
}

TEST_CASE("dataset files round-trip bit-exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "ino_ds_test";
    std::filesystem::remove_all(dir);

    DarcyConfig cfg;
    cfg.fine_n = 33;
    cfg.resolutions = {9};
    cfg.n_train = 2;
    cfg.n_val = 1;
    cfg.n_test = 1;
    cfg.seed = 4;
    Dataset ds = generate_darcy_dataset(cfg)[0];
    dataset_write(ds, dir);
    const Dataset back = dataset_read(dir);

    CHECK(back.problem == ds.problem);
    CHECK(back.train_idx == ds.train_idx);
    CHECK(back.test_idx == ds.test_idx);
    REQUIRE(back.num_samples() == ds.num_samples());
    for (std::size_t s = 0; s < ds.num_samples(); ++s) {
        for (std::size_t i = 0; i < ds.f[s].size(); ++i) CHECK(back.f[s][i] == ds.f[s][i]);
        for (std::size_t i = 0; i < ds.u[s].size(); ++i) CHECK(back.u[s][i] == ds.u[s][i]);
    }
    for (std::size_t i = 0; i < ds.cloud->coords.size(); ++i) {
        CHECK(back.cloud->coords[i] == ds.cloud->coords[i]);
    }

    SUBCASE("corrupted manifest is rejected with the offending field") {
        {
            std::ofstream os(dir / "manifest");
            os << "{\"format_version\": 1, \"layout\": {\"f\": [\"scalar\"], \"u\": [\"scalar\"]}}";
        }
        CHECK_THROWS_WITH_AS(dataset_read(dir), doctest::Contains("problem"), nlohmann::json::exception);
    }
    SUBCASE("format version mismatch is rejected") {
        {
            std::ofstream os(dir / "manifest");
            os << "{\"format_version\": 99}";
        }
        CHECK_THROWS_WITH_AS(dataset_read(dir), doctest::Contains("version"), std::runtime_error);
    }
    SUBCASE("truncated arrays are rejected") {
        std::filesystem::resize_file(dir / "sample_0_f.bin", 16);
        CHECK_THROWS_WITH_AS(dataset_read(dir), doctest::Contains("truncated"), std::runtime_error);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("an empty dataset round-trips") {
    const auto dir = std::filesystem::temp_directory_path() / "ino_ds_empty";
    std::filesystem::remove_all(dir);
    Dataset ds;
    ds.problem = "generic";
    ds.layout = ChannelLayout::scalar_to_scalar();
    ds.cloud = std::make_shared<PointCloud>(make_grid(2, 2, Rect{0, 0, 1, 1}));
    dataset_write(ds, dir);
    const Dataset back = dataset_read(dir);
    CHECK(back.num_samples() == 0);
    CHECK(back.cloud->num_nodes() == 4);
    std::filesystem::remove_all(dir);
}
