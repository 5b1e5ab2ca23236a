#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "ino/checkpoint.hpp"
#include "ino/operators.hpp"
#include "ino/rng.hpp"
#include "ino/tensor_ops.hpp"

#include "support/dense_reference.hpp"

using namespace ino;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

PointCloud random_cloud(std::size_t m, Rng& rng) {
    PointCloud c;
    c.coords = Tensor({m, 2});
    for (std::size_t i = 0; i < 2 * m; ++i) c.coords[i] = rng.uniform(-1.0, 1.0);
    c.quad_weights.clear();
    for (std::size_t i = 0; i < m; ++i) c.quad_weights.push_back(rng.uniform(0.05, 0.3));
    return c;
}

Tensor random_field(std::size_t m, std::size_t width, Rng& rng) {
    Tensor f({m, width});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(-1.0, 1.0);
    return f;
}


double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

OperatorConfig tiny_config(Architecture arch) {
    const ChannelLayout layout = is_vector_output(arch) ? ChannelLayout::vector_bc_to_displacement()
                                                        : ChannelLayout::scalar_to_scalar();
    OperatorConfig cfg = OperatorConfig::desk(arch, layout);
    cfg.hidden_dim = 4;
    cfg.kernel_hidden = {6, 5};
    cfg.layers = 3;
    return cfg;
}

}  // namespace

TEST_CASE("config invariants and kernel argument counts") {
    OperatorConfig darcy_gno = OperatorConfig::desk(Architecture::gno, ChannelLayout::scalar_to_scalar());
    CHECK(darcy_gno.kernel_input_width() == 6);
    OperatorConfig darcy_ino = OperatorConfig::desk(Architecture::ino_scalar,
                                                    ChannelLayout::scalar_to_scalar());
    CHECK(darcy_ino.kernel_input_width() == 4);
    OperatorConfig darcy_norm = OperatorConfig::desk(Architecture::norm_ino,
                                                     ChannelLayout::scalar_to_scalar());
    CHECK(darcy_norm.kernel_input_width() == 3);
    OperatorConfig lps_ino = OperatorConfig::desk(Architecture::ino_vector,
                                                  ChannelLayout::vector_bc_to_displacement());
    CHECK(lps_ino.kernel_input_width() == 6);

    OperatorConfig bad = darcy_ino;
    bad.layers = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(darcy_ino.effective_tau() == doctest::Approx(0.25));
}

TEST_CASE("single-pair integral term equals the one-term quadrature") {
    Rng rng(3);
    OperatorConfig cfg = tiny_config(Architecture::ino_scalar);
    cfg.layers = 1;
    cfg.radius = 0.5;  // the two nodes only see themselves
    ModelParams mp = init_params(cfg, 5);

    PointCloud cloud;
    cloud.coords = Tensor({2, 2}, {0.0, 0.0, 10.0, 0.0});
    cloud.quad_weights = {0.3, 0.7};
    const Tensor f = random_field(2, 1, rng);

    const LayerState st = lift(mp, cloud, f);
    const LayerState next = integral_layer_scalar(mp, cloud, f, st);

    // independent evaluation of h0 + tau * relu(W h0 + w0 * kappa(feat(0,0)) h0 + c)
    const auto kappa = oracle::mlp(mp, "kappa", 3, oracle::features(cfg, cloud, f, 0, 0));
    const Tensor& w = mp.find("layer.W");
    const Tensor& c = mp.find("layer.b");
    for (std::size_t j = 0; j < cfg.hidden_dim; ++j) {
        double integral = 0.0;
        for (std::size_t i = 0; i < cfg.hidden_dim; ++i) {
            integral += cloud.quad_weights[0] * kappa[j * cfg.hidden_dim + i] * st.h.at(0, i);
        }
        double pre = c[j] + integral;
        for (std::size_t i = 0; i < cfg.hidden_dim; ++i) pre += st.h.at(0, i) * w.at(i, j);
        const double expect = st.h.at(0, j) + cfg.effective_tau() * (pre > 0.0 ? pre : 0.0);
        CHECK(next.h.at(0, j) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("layer updates match the dense reference implementation") {
    Rng rng(21);
    for (Architecture arch : {Architecture::gno, Architecture::ino_scalar, Architecture::norm_ino,
                              Architecture::ino_vector, Architecture::ino_vector_position}) {
        CAPTURE(architecture_name(arch));
        const OperatorConfig cfg = tiny_config(arch);
        const ModelParams mp = init_params(cfg, 17 + static_cast<std::uint64_t>(arch));
        for (std::size_t m : {1ul, 3ul, 5ul}) {
            PointCloud cloud = random_cloud(std::max<std::size_t>(m, 2), rng);
            const Tensor f = random_field(cloud.num_nodes(), cfg.layout.f_width(), rng);

            const Tensor mine = forward(mp, cloud, f);
            const Tensor ref = oracle::forward(mp, cloud, f);
            CHECK(max_abs_diff(mine, ref) <= 1e-12);

            // single-layer equivalence through the public layer entry points
            const LayerState st0 = lift(mp, cloud, f);
            oracle::State ref_st = oracle::lift(mp, cloud, f);
            for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
                for (std::size_t j = 0; j < cfg.hidden_dim; ++j) {
                    CHECK(std::abs(st0.h.at(i, j) - ref_st.h[i][j]) <= 1e-13);
                }
            }
            const LayerState st1 = is_vector_output(arch) ? integral_layer_vector(mp, cloud, f, st0)
                                                          : integral_layer_scalar(mp, cloud, f, st0);
            ref_st = oracle::layer(mp, cloud, f, ref_st);
            for (std::size_t i = 0; i < cloud.num_nodes(); ++i) {
                for (std::size_t j = 0; j < cfg.hidden_dim; ++j) {
                    CHECK(std::abs(st1.h.at(i, j) - ref_st.h[i][j]) <= 1e-12);
                }
                if (is_vector_output(arch)) {
                    CHECK(std::abs(st1.xcoord.at(i, 0) - ref_st.xc[i][0]) <= 1e-12);
                    CHECK(std::abs(st1.xcoord.at(i, 1) - ref_st.xc[i][1]) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("lift behaviors") {
    Rng rng(31);
    OperatorConfig cfg = tiny_config(Architecture::ino_scalar);
    ModelParams mp = init_params(cfg, 9);
    PointCloud cloud = random_cloud(6, rng);

    SUBCASE("zero input lifts to the bias") {
        const Tensor f({6, 1});
        const LayerState st = lift(mp, cloud, f);
        const Tensor& p = mp.find("lift.b");
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < cfg.hidden_dim; ++j) CHECK(st.h.at(i, j) == p[j]);
        }
    }
    SUBCASE("invariant lifting ignores rotations of vector channels") {
        OperatorConfig vcfg = tiny_config(Architecture::ino_vector);
        ModelParams vmp = init_params(vcfg, 10);
        const Tensor f = random_field(6, 3, rng);
        const FrameTransform t = FrameTransform::rotation(1.1);
        auto [moved, sample] = apply_transform(cloud, FunctionSample{f, Tensor{}}, t, vcfg.layout);
        const LayerState a = lift(vmp, cloud, f);
        const LayerState b = lift(vmp, moved, sample.f);
        CHECK(max_abs_diff(a.h, b.h) <= 1e-12);
        CHECK(max_abs_diff(b.xcoord, moved.coords) == 0.0);
    }
    SUBCASE("gno lifting is frame dependent (negative control)") {
        OperatorConfig gcfg = tiny_config(Architecture::gno);
        ModelParams gmp = init_params(gcfg, 11);
        const Tensor f = random_field(6, 1, rng);
        const FrameTransform t = FrameTransform::translation(0.5, 0.0);
        auto [moved, sample] = apply_transform(cloud, FunctionSample{f, Tensor{}}, t, gcfg.layout);
        const LayerState a = lift(gmp, cloud, f);
        const LayerState b = lift(gmp, moved, sample.f);
        CHECK(max_abs_diff(a.h, b.h) > 1e-6);
    }
}

TEST_CASE("zero kernel and weights make the residual layer an identity") {
    OperatorConfig cfg = tiny_config(Architecture::ino_scalar);
    cfg.layers = 1;
    ModelParams mp = init_params(cfg, 1);
    for (std::size_t k = 0; k < mp.tensors.size(); ++k) {
        if (mp.names[k] != "lift.W" && mp.names[k] != "lift.b") {
            for (std::size_t i = 0; i < mp.tensors[k].size(); ++i) mp.tensors[k][i] = 0.0;
        }
    }
    Rng rng(2);
    PointCloud cloud = random_cloud(5, rng);
    const Tensor f = random_field(5, 1, rng);
    const LayerState st = lift(mp, cloud, f);
    const LayerState next = integral_layer_scalar(mp, cloud, f, st);
    for (std::size_t i = 0; i < st.h.size(); ++i) CHECK(next.h[i] == st.h[i]);
}

TEST_CASE("projection variants") {
    Rng rng(12);
    SUBCASE("displacement output of unmoved points is zero") {
        OperatorConfig cfg = tiny_config(Architecture::ino_vector);
        ModelParams mp = init_params(cfg, 3);
        PointCloud cloud = random_cloud(4, rng);
        LayerState st;
        st.h = Tensor({4, cfg.hidden_dim});
        st.xcoord = cloud.coords;
        const Tensor u = project(mp, cloud, st);
        for (double v : u.values()) CHECK(v == 0.0);
    }
    SUBCASE("position output of unmoved points is the coordinates") {
        OperatorConfig cfg = tiny_config(Architecture::ino_vector_position);
        ModelParams mp = init_params(cfg, 3);
        PointCloud cloud = random_cloud(4, rng);
        LayerState st;
        st.h = Tensor({4, cfg.hidden_dim});
        st.xcoord = cloud.coords;
        const Tensor u = project(mp, cloud, st);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == cloud.coords[i]);
    }
    SUBCASE("scalar projection with zero final layer is the final bias") {
        OperatorConfig cfg = tiny_config(Architecture::ino_scalar);
        ModelParams mp = init_params(cfg, 3);
        Tensor& q2w = mp.find("Q1.W");
        for (std::size_t i = 0; i < q2w.size(); ++i) q2w[i] = 0.0;
        mp.find("Q1.b")[0] = 0.625;
        PointCloud cloud = random_cloud(4, rng);
        LayerState st;
        st.h = random_field(4, cfg.hidden_dim, rng);
        const Tensor u = project(mp, cloud, st);
        for (double v : u.values()) CHECK(v == 0.625);
    }
}

TEST_CASE("kernel feature rows are frame-invariant exactly when they should be") {
    Rng rng(77);
    PointCloud cloud = random_cloud(8, rng);
    const Tensor f = random_field(8, 1, rng);
    const FrameTransform t = random_rigid(1.5, 2 * kPi, rng);

    OperatorConfig ino = tiny_config(Architecture::ino_scalar);
    auto [moved, sample] = apply_transform(cloud, FunctionSample{f, Tensor{}}, t, ino.layout);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t i = rng.below(8), j = rng.below(8);
        const auto a = kernel_features(ino, cloud, f, i, j);
        const auto b = kernel_features(ino, moved, sample.f, i, j);
        REQUIRE(a.size() == 4);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-12);
    }

    OperatorConfig gno = tiny_config(Architecture::gno);
    const auto ga = kernel_features(gno, cloud, f, 0, 1);
    const auto gb = kernel_features(gno, moved, sample.f, 0, 1);
    REQUIRE(ga.size() == 6);
    CHECK(std::abs(ga[0] - gb[0]) > 1e-6);

    OperatorConfig norm = tiny_config(Architecture::norm_ino);
    CHECK(kernel_features(norm, cloud, f, 0, 1).size() == 3);
}

TEST_CASE("invariance and equivariance of the full operators") {
    Rng rng(55);
    const PointCloud grid = make_grid(4, 4, Rect{0, 0, 1, 1});

    SUBCASE("ino-scalar is translation and rotation invariant") {
        OperatorConfig cfg = tiny_config(Architecture::ino_scalar);
        const Tensor f = random_field(16, 1, rng);
        double worst = 0.0;
        for (int draw = 0; draw < 5; ++draw) {
            ModelParams mp = init_params(cfg, 100 + draw);
            const Tensor base = forward(mp, grid, f);
            for (int trial = 0; trial < 4; ++trial) {
                const FrameTransform t = random_rigid(2.0, 2 * kPi, rng);
                auto [moved, sample] = apply_transform(grid, FunctionSample{f, Tensor{}}, t, cfg.layout);
                worst = std::max(worst, max_abs_diff(forward(mp, moved, sample.f), base));
            }
        }
        CHECK(worst <= 1e-10);
    }

    SUBCASE("ino-vector displacement output rotates with the frame") {
        OperatorConfig cfg = tiny_config(Architecture::ino_vector);
        const Tensor f = random_field(16, 3, rng);
        double worst = 0.0;
        for (int draw = 0; draw < 3; ++draw) {
            ModelParams mp = init_params(cfg, 200 + draw);
            const Tensor base = forward(mp, grid, f);
            for (int trial = 0; trial < 4; ++trial) {
                const FrameTransform t = random_rigid(2.0, 2 * kPi, rng);
                auto [moved, sample] = apply_transform(grid, FunctionSample{f, Tensor{}}, t, cfg.layout);
                const Tensor out = forward(mp, moved, sample.f);
                Tensor expect({16, 2});
                for (std::size_t i = 0; i < 16; ++i) {
                    const auto v = t.rotate(base.at(i, 0), base.at(i, 1));
                    expect.at(i, 0) = v[0];
                    expect.at(i, 1) = v[1];
                }
                worst = std::max(worst, max_abs_diff(out, expect));
            }
        }
        CHECK(worst <= 1e-10);
    }

    SUBCASE("position variant is fully equivariant") {
        OperatorConfig cfg = tiny_config(Architecture::ino_vector_position);
        const Tensor f = random_field(16, 3, rng);
        double worst = 0.0;
        for (int draw = 0; draw < 3; ++draw) {
            ModelParams mp = init_params(cfg, 300 + draw);
            const Tensor base = forward(mp, grid, f);
            for (int trial = 0; trial < 4; ++trial) {
                const FrameTransform t = random_rigid(2.0, 2 * kPi, rng);
                auto [moved, sample] = apply_transform(grid, FunctionSample{f, Tensor{}}, t, cfg.layout);
                const Tensor out = forward(mp, moved, sample.f);
                Tensor expect({16, 2});
                for (std::size_t i = 0; i < 16; ++i) {
                    const auto v = t.rotate(base.at(i, 0), base.at(i, 1));
                    expect.at(i, 0) = v[0] + t.g[0];
                    expect.at(i, 1) = v[1] + t.g[1];
                }
                worst = std::max(worst, max_abs_diff(out, expect));
            }
        }
        CHECK(worst <= 1e-10);
    }

    SUBCASE("gno is not invariant (negative control)") {
        OperatorConfig ino = tiny_config(Architecture::ino_scalar);
        OperatorConfig gno = tiny_config(Architecture::gno);
        const Tensor f = random_field(16, 1, rng);
        const FrameTransform t = FrameTransform::rotation(kPi / 2);
        auto [moved_i, sample_i] = apply_transform(grid, FunctionSample{f, Tensor{}}, t, ino.layout);

        ModelParams imp = init_params(ino, 42);
        ModelParams gmp = init_params(gno, 42);
        const double ino_dev = max_abs_diff(forward(imp, moved_i, sample_i.f), forward(imp, grid, f));
        const double gno_dev = max_abs_diff(forward(gmp, moved_i, sample_i.f), forward(gmp, grid, f));
        CHECK(gno_dev >= 100.0 * ino_dev);
    }
}

TEST_CASE("the same parameters evaluate across resolutions") {
    OperatorConfig cfg = tiny_config(Architecture::ino_scalar);
    ModelParams mp = init_params(cfg, 8);
    Rng rng(66);
    const PointCloud coarse = make_grid(16, 16, Rect{0, 0, 1, 1});
    const PointCloud fine = make_grid(31, 31, Rect{0, 0, 1, 1});
    const Tensor fc = random_field(coarse.num_nodes(), 1, rng);
    const Tensor ff = random_field(fine.num_nodes(), 1, rng);
    CHECK(forward(mp, coarse, fc).rows() == 256);
    CHECK(forward(mp, fine, ff).rows() == 961);
}

TEST_CASE("feature deduplication and the tape do not change forward values") {
    Rng rng(91);
    const PointCloud grid = make_grid(5, 5, Rect{0, 0, 1, 1});
    for (Architecture arch : {Architecture::ino_scalar, Architecture::gno, Architecture::ino_vector}) {
        CAPTURE(architecture_name(arch));
        OperatorConfig cfg = tiny_config(arch);
        ModelParams mp = init_params(cfg, 50 + static_cast<int>(arch));
        Tensor f = random_field(25, cfg.layout.f_width(), rng);
        if (arch != Architecture::gno) {
            // two-valued field gives the dedup something to collapse
            for (std::size_t i = 0; i < f.size(); ++i) f[i] = f[i] > 0 ? 3.0 : 12.0;
        }

        const SampleCache dedup = build_cache(cfg, grid, f, true);
        const SampleCache plain = build_cache(cfg, grid, f, false);
        if (arch == Architecture::ino_scalar) CHECK(dedup.features.rows() < plain.features.rows());

        const Tensor a = forward(mp, grid, f, dedup);
        const Tensor b = forward(mp, grid, f, plain);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

        Graph g;
        TapeModel tm = bind_tape(g, mp);
        const Tensor& c = g.value(forward_tape(g, tm, grid, f, dedup));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "ino_ckpt_test";
    std::filesystem::remove_all(dir);
    OperatorConfig cfg = tiny_config(Architecture::ino_vector);
    cfg.tau = 0.125;
    ModelParams mp = init_params(cfg, 1234);
    save_checkpoint(mp, dir);
    const ModelParams back = load_checkpoint(dir);
    CHECK(back.config.arch == cfg.arch);
    CHECK(back.config.layers == cfg.layers);
    CHECK(back.config.tau == doctest::Approx(0.125));
    CHECK(back.init_seed == 1234);
    REQUIRE(back.tensors.size() == mp.tensors.size());
    for (std::size_t k = 0; k < mp.tensors.size(); ++k) {
        CHECK(back.names[k] == mp.names[k]);
        for (std::size_t i = 0; i < mp.tensors[k].size(); ++i) CHECK(back.tensors[k][i] == mp.tensors[k][i]);
    }

    // a corrupted manifest is rejected
    {
        std::ofstream os(dir / "manifest");
        os << "{\"format_version\": 99}";
    }
    CHECK_THROWS(load_checkpoint(dir));
    std::filesystem::remove_all(dir);
}
