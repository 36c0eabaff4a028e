#include <doctest.h>

#include <cstring>

#include <Eigen/Dense>

#include "tcwm/errors.hpp"
#include "tcwm/evaluation.hpp"
#include "tcwm/model.hpp"
#include "tcwm/world.hpp"
#include "test_util.hpp"

using namespace tcwm;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny() {
    ModelConfig mc;
    mc.d_x = 3;
    mc.d_p = 2;
    mc.d_a = 2;
    mc.d_z = 4;
    mc.d_s = 2;
    mc.hidden = 6;
    mc.history = 1;
    return mc;
}

void zero(MlpNet& net) {
    for (auto& l : net.layers) {
        l.weight.fill(0);
        l.bias.fill(0);
    }
}

void zero(AffineLayer& l) {
    l.weight.fill(0);
    l.bias.fill(0);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config validation") {
    ModelConfig mc = tiny();
    mc.d_s = 5;
    CHECK_THROWS_AS(TcwmModel(mc, 0), ValidationError);
    mc = tiny();
    mc.d_z = 0;
    CHECK_THROWS_AS(TcwmModel(mc, 0), ValidationError);
    mc = tiny();
    CHECK(ModelConfig::from_json(mc.to_json()).to_json() == mc.to_json());
}

TEST_CASE("embed_joint examples") {
    TcwmModel m(tiny(), 1);
    Rng rng(1);
    const Tensor x = test::random_matrix(2, 3, rng), s = test::random_matrix(2, 2, rng);
    SUBCASE("output width is d_x + d_pe") { CHECK(m.embed_joint(x, s).cols() == 5); }
    SUBCASE("zero proprio embedder pads zeros") {
        zero(m.proprio_embedder);
        const Tensor j = m.embed_joint(x, s);
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t c = 0; c < 3; ++c) CHECK(j(r, c) == x(r, c));
            CHECK(j(r, 3) == 0);
            CHECK(j(r, 4) == 0);
        }
    }
    SUBCASE("different proprio gives different joints") {
        Tensor s2 = s;
        s2(0, 1) += 0.5f;
        const Tensor a = m.embed_joint(x, s), b = m.embed_joint(x, s2);
        CHECK(std::vector<Real>(a.row(0).begin(), a.row(0).end()) != std::vector<Real>(b.row(0).begin(), b.row(0).end()));
    }
    SUBCASE("row count mismatch") { CHECK_THROWS_AS(m.embed_joint(x, test::random_matrix(3, 2, rng)), DimensionError); }
}

TEST_CASE("encode examples") {
    ModelConfig mc = tiny();
    mc.d_x = 2;
    mc.d_z = 2;
    mc.d_s = 1;
    TcwmModel m(mc, 2);
    SUBCASE("leading-coordinate selector") {
        zero(m.projector);
        m.projector.weight(0, 0) = 1;
        m.projector.weight(1, 1) = 1;
        const Tensor z = m.encode(Tensor({1, 4}, {1, 2, 3, 4}));
        CHECK(z(0, 0) == 1);
        CHECK(z(0, 1) == 2);
    }
    SUBCASE("zero weights give the bias") {
        zero(m.projector);
        m.projector.bias[0] = 0.5f;
        m.projector.bias[1] = -2;
        const Tensor z = m.encode(Tensor({1, 4}, {1, 2, 3, 4}));
        CHECK(z(0, 0) == 0.5f);
        CHECK(z(0, 1) == -2);
    }
}

TEST_CASE("encode then a least-squares decoder reproduces the joint embedding") {
    WorldSpec ws;
    ws.sigma_x = 0;
    ws.sigma_z = 0;
    const World w = build_world(ws);
    GenerateOptions go;
    go.n_traj = 8;
    go.horizon = 40;
    const auto data = generate_dataset(w, go);
    ModelConfig mc;  // d_z = 16 = true latent width
    TcwmModel m(mc, 3);
    const auto stats = compute_stats(data.proprio);
    const Tensor joint = m.embed_joint(data.embeddings, stats.standardize(data.proprio));
    const Tensor z = m.encode(joint);

    // Closed-form oracle: affine least squares from z to the joint embedding.
    Eigen::MatrixXd zz(z.rows(), z.cols() + 1);
    zz << to_eigen(z), Eigen::VectorXd::Ones(z.rows());
    const Eigen::MatrixXd coef = zz.colPivHouseholderQr().solve(to_eigen(joint));
    for (std::size_t o = 0; o < joint.cols(); ++o) {
        for (std::size_t i = 0; i < z.cols(); ++i) m.embed_decoder.weight(o, i) = Real(coef(i, o));
        m.embed_decoder.bias[o] = Real(coef(z.cols(), o));
    }
    const Tensor back = m.decode_embedding(z);
    double worst = 0;
    for (std::size_t i = 0; i < back.size(); ++i) worst = std::max(worst, std::fabs(double(back[i]) - joint[i]));
    CHECK(worst <= 1e-3);
}

TEST_CASE("decode_embedding examples") {
    SUBCASE("zero decoder") {
        TcwmModel m(tiny(), 4);
        zero(m.embed_decoder);
        const Tensor out = m.decode_embedding(Tensor::matrix(2, 4, 1));
        for (Real v : out.values()) CHECK(v == 0);
    }
    SUBCASE("decoder inverting a square projector") {
        ModelConfig mc = tiny();
        mc.d_x = 2;  // joint width 4 = d_z
        TcwmModel m(mc, 5);
        Eigen::Matrix4d p;
        p << 2, 1, 0, 0, 0, 1, 0, 1, 1, 0, 3, 0, 0, 0, 1, 1;
        const Eigen::Matrix4d inv = p.inverse();
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                m.projector.weight(i, j) = Real(p(i, j));
                m.embed_decoder.weight(i, j) = Real(inv(i, j));
            }
        }
        m.projector.bias.fill(0);
        m.embed_decoder.bias.fill(0);
        const Tensor x({1, 4}, {0.5f, -1, 2, 0.25f});
        const Tensor back = m.decode_embedding(m.encode(x));
        for (std::size_t i = 0; i < 4; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-5));
    }
}

TEST_CASE("dynamics heads") {
    Rng rng(6);
    SUBCASE("zero nets predict zero") {
        TcwmModel m(tiny(), 6);
        zero(m.dynamics);
        zero(m.tc_dynamics);
        const Tensor zw = test::random_matrix(2 * 3, 4, rng).reshaped({3, 2, 4});
        const Tensor aw = test::random_matrix(2 * 3, 2, rng).reshaped({3, 2, 2});
        const Tensor zn = m.predict_next(zw, aw), sn = m.predict_proprio(zw, aw);
        CHECK(zn.shape() == Shape{3, 4});
        for (Real v : zn.values()) CHECK(v == 0);
        for (Real v : sn.values()) CHECK(v == 0);
    }
    SUBCASE("output widths do not depend on H") {
        for (std::size_t h : {0u, 1u, 3u}) {
            ModelConfig mc = tiny();
            mc.history = h;
            TcwmModel m(mc, 7);
            const Tensor zw = test::random_matrix(2 * (h + 1), 4, rng).reshaped({2, h + 1, 4});
            const Tensor aw = test::random_matrix(2 * (h + 1), 2, rng).reshaped({2, h + 1, 2});
            CHECK(m.predict_next(zw, aw).shape() == Shape{2, 4});
            CHECK(m.predict_proprio(zw, aw).shape() == Shape{2, 2});
        }
    }
    SUBCASE("H = 0 is a one-step model on (z_t, a_t)") {
        ModelConfig mc = tiny();
        mc.history = 0;
        TcwmModel m(mc, 8);
        const Tensor z = test::random_matrix(1, 4, rng), a = test::random_matrix(1, 2, rng);
        Tensor in = Tensor::matrix(1, 6);
        std::copy_n(z.data(), 4, in.data());
        std::copy_n(a.data(), 2, in.data() + 4);
        CHECK(m.predict_next(z, a).storage() == m.dynamics.forward(in).storage());
    }
    SUBCASE("window length mismatch") {
        TcwmModel m(tiny(), 9);
        CHECK_THROWS_AS(m.predict_next(Tensor::matrix(3, 4), Tensor::matrix(3, 2)), DimensionError);
    }
}

TEST_CASE("pack_window interleaves latents and actions per step") {
    const Tensor z({4, 1}, {1, 2, 3, 4});
    const Tensor a({4, 1}, {10, 20, 30, 40});
    const Tensor p = pack_window(z, a, 2);
    CHECK(p.shape() == Shape{2, 4});
    CHECK(p.storage() == std::vector<Real>{1, 10, 2, 20, 3, 30, 4, 40});
}

TEST_CASE("alignment slice") {
    TcwmModel m(tiny(), 10);
    SUBCASE("slice mode keeps g_phi columns beyond d_s at zero") {
        for (std::size_t o = 0; o < m.align_head.out_dim(); ++o)
            for (std::size_t j = 2; j < 4; ++j) CHECK(m.align_head.weight(o, j) == 0);
        const Tensor in = m.align_input(Tensor({1, 4}, {1, 2, 3, 4}));
        CHECK(in.storage() == std::vector<Real>{1, 2, 0, 0});
        CHECK(m.align_head.out_dim() == 4);  // 2 * d_s
    }
    SUBCASE("full-latent mode passes z through") {
        ModelConfig mc = tiny();
        mc.align_full_latent = true;
        TcwmModel f(mc, 10);
        CHECK(f.align_input(Tensor({1, 4}, {1, 2, 3, 4})).storage() == std::vector<Real>{1, 2, 3, 4});
    }
    SUBCASE("task and complement blocks") {
        const Tensor z({1, 4}, {1, 2, 3, 4});
        CHECK(m.task_block(z).storage() == std::vector<Real>{1, 2});
        CHECK(m.complement_block(z).storage() == std::vector<Real>{3, 4});
    }
}

TEST_CASE("effective_split examples") {
    ModelConfig mc = tiny();
    mc.d_z = 6;
    mc.align_full_latent = true;
    TcwmModel m(mc, 11);
    m.align_head.weight.fill(0);
    SUBCASE("all-zero g_phi") { CHECK(m.effective_split(0.1).empty()); }
    SUBCASE("exactly three nonzero columns") {
        for (std::size_t j : {1u, 3u, 4u}) m.align_head.weight(0, j) = 0.5f + 0.1f * Real(j);
        CHECK(m.effective_split(0.1) == std::vector<std::size_t>{1, 3, 4});
    }
}

TEST_CASE("direct-embedding layout") {
    ModelConfig mc = tiny();
    mc.direct_embedding = true;
    TcwmModel m(mc, 12);
    CHECK(m.latent_dim() == 5);
    const Tensor x({1, 5}, {1, 2, 3, 4, 5});
    CHECK(m.encode(x).storage() == x.storage());
}

TEST_CASE("checkpoint round trip") {
    test::TempDir dir("ckpt");
    ModelConfig mc = tiny();
    mc.visual_decoder = true;
    TcwmModel m(mc, 13);
    const auto stats = compute_stats(Tensor({2, 2}, {1, 2, 3, 5}));
    save_checkpoint(m, stats, dir.path(), {{"tag", 7}});
    auto ck = load_checkpoint(dir.path());
    CHECK(ck.meta.at("tag") == 7);
    CHECK(ck.stats.mean == stats.mean);
    auto a = m.params(), b = ck.model.params();
    auto va = m.visual_params(), vb = ck.model.visual_params();
    a.insert(a.end(), va.begin(), va.end());
    b.insert(b.end(), vb.begin(), vb.end());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(std::memcmp(a[i].value.data(), b[i].value.data(), a[i].value.size_bytes()) == 0);
    }
    SUBCASE("missing component") {
        fs::remove(dir / "projector.weight.f32");
        CHECK_THROWS_AS(load_checkpoint(dir.path()), IoError);
    }
    SUBCASE("missing directory") { CHECK_THROWS_AS(load_checkpoint(dir / "nope"), IoError); }
}

}  // TEST_SUITE
