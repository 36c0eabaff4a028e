#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tcwm/errors.hpp"
#include "tcwm/evaluation.hpp"
#include "test_util.hpp"

using namespace tcwm;

namespace {

Tensor uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
    Tensor t = Tensor::matrix(rows, cols);
    for (auto& v : t.values()) v = Real(rng.uniform(lo, hi));
    return t;
}

Tensor map_rows(const Tensor& x, std::size_t out_cols, const std::function<void(std::span<const Real>, std::span<Real>)>& f) {
    Tensor y = Tensor::matrix(x.rows(), out_cols);
    for (std::size_t r = 0; r < x.rows(); ++r) f(x.row(r), y.row(r));
    return y;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("linear probe examples") {
    Rng rng(1);
    const Tensor z = test::random_matrix(500, 4, rng);
    SUBCASE("exact linear map") {
        const Tensor y = map_rows(z, 2, [](auto in, auto out) {
            out[0] = 2 * in[0] - in[3] + 0.5f;
            out[1] = in[1] + in[2];
        });
        const auto p = linear_probe(z, y);
        CHECK(p.r2_mean >= 0.999);
        CHECK(p.r2_per_dim.size() == 2);
    }
    SUBCASE("independent noise, n = 1000, d = 16") {
        Rng r2(2);
        const Tensor big = test::random_matrix(1000, 16, r2), noise = test::random_matrix(1000, 3, r2);
        CHECK(linear_probe(big, noise).r2_mean <= 0.05);
    }
    SUBCASE("ridge needs alpha > 0") { CHECK_THROWS(linear_probe(z, z, 5, 0.0)); }
    SUBCASE("transfer R^2 on a held-out split") {
        const Tensor y = map_rows(z, 1, [](auto in, auto out) { out[0] = in[0] - 3 * in[1]; });
        CHECK(probe_transfer_r2(z.slice_rows(0, 400), y.slice_rows(0, 400), z.slice_rows(400, 100),
                                y.slice_rows(400, 100)) >= 0.999);
    }
}

TEST_CASE("A1 sensitivity examples") {
    Rng rng(3);
    const Tensor z = test::random_matrix(100, 3, rng);
    const auto id = check_a1([](const Tensor& t) { return t; }, z, 256);
    CHECK(id.p5 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(id.p95 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(id.pass);
    const auto twice = check_a1(
        [](const Tensor& t) {
            Tensor o = t;
            for (auto& v : o.values()) v *= 2;
            return o;
        },
        z, 256);
    CHECK(twice.p50 == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(twice.pairs == 256);
}

TEST_CASE("A2 distance correlation examples") {
    Rng rng(4);
    const Tensor x = test::random_matrix(400, 5, rng);
    SUBCASE("identity encoder") {
        const auto r = check_a2(x, x);
        CHECK(r.spearman == doctest::Approx(1.0));
        CHECK(r.pearson == doctest::Approx(1.0));
    }
    SUBCASE("independent latents") {
        Rng r2(5);
        const Tensor z = test::random_matrix(400, 5, r2);
        CHECK(std::fabs(check_a2(z, x, 2048).spearman) <= 0.1);
    }
    SUBCASE("rank correlation ignores a monotone rescaling of distances") {
        Tensor z = x;
        for (auto& v : z.values()) v *= 3;
        CHECK(check_a2(z, x).spearman == doctest::Approx(1.0));
    }
    SUBCASE("constant latents are undefined") {
        CHECK_FALSE(check_a2(Tensor::matrix(400, 2, 1), x).defined);
    }
}

TEST_CASE("A4 on ground-truth latents") {
    WorldSpec ws;
    ws.sigma_x = 0;
    const World w = build_world(ws);
    GenerateOptions go;
    go.n_traj = 16;
    go.horizon = 50;
    const auto data = generate_dataset(w, go);
    const auto r = check_a4(data.latents, ws.d_s, data.proprio);
    CHECK(r.task.r2_mean >= 0.99);
    CHECK(r.efficiency_task == doctest::Approx(r.task.r2_mean / double(ws.d_s)));
    CHECK(r.efficiency_complement == doctest::Approx(r.complement.r2_mean / double(ws.d_c)));
}

TEST_CASE("affine recovery examples") {
    Rng rng(6);
    const Tensor zs = test::random_matrix(300, 3, rng);
    SUBCASE("2 z + 1") {
        const Tensor est = map_rows(zs, 3, [](auto in, auto out) {
            for (std::size_t i = 0; i < 3; ++i) out[i] = 2 * in[i] + 1;
        });
        const auto fit = affine_recovery(est, zs);
        CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-6));
        CHECK((fit.a - 0.5 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-5);
        CHECK((fit.b + 0.5 * Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() <= 1e-5);
    }
    SUBCASE("permutation") {
        const Tensor est = map_rows(zs, 3, [](auto in, auto out) {
            out[0] = in[2];
            out[1] = in[0];
            out[2] = in[1];
        });
        const auto fit = affine_recovery(est, zs);
        CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-6));
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
        p(0, 1) = p(1, 2) = p(2, 0) = 1;
        CHECK((fit.a - p).cwiseAbs().maxCoeff() <= 1e-5);
    }
    SUBCASE("elementwise cube is not affine") {
        Rng r2(7);
        const Tensor u = uniform_matrix(2000, 2, r2, -1, 1);
        const Tensor cube = map_rows(u, 2, [](auto in, auto out) {
            for (std::size_t i = 0; i < 2; ++i) out[i] = in[i] * in[i] * in[i];
        });
        // Closed form: regressing x on x^3 for x ~ U[-1,1] gives
        // R^2 = E[x^4]^2 / (E[x^2] E[x^6]) = (1/5)^2 / ((1/3)(1/7)) = 21/25.
        const double oracle = 21.0 / 25.0;
        const auto fit = affine_recovery(cube, u);
        CHECK(fit.r2 == doctest::Approx(oracle).epsilon(0.02));
        CHECK(fit.r2 <= 0.95);
    }
    SUBCASE("rank deficiency falls back to ridge") {
        const Tensor est = map_rows(zs, 2, [](auto in, auto out) { out[0] = out[1] = in[0]; });
        CHECK(affine_recovery(est, zs).ridge_fallback);
    }
}

TEST_CASE("effective rank examples") {
    SUBCASE("isotropic Gaussian, d = 8") {
        Rng rng(8);
        const double r = effective_rank(test::random_matrix(10000, 8, rng));
        CHECK(r >= 7.5);
        CHECK(r <= 8.0);
    }
    SUBCASE("identical samples") { CHECK(effective_rank(Tensor::matrix(20, 4, 3)) == 1.0); }
    SUBCASE("one dominant direction") {
        Rng rng(9);
        Tensor z = test::random_matrix(2000, 4, rng);
        for (std::size_t r = 0; r < z.rows(); ++r) {
            z(r, 0) *= 10;
            for (std::size_t c = 1; c < 4; ++c) z(r, c) *= 1e-3f;
        }
        CHECK(effective_rank(z) == doctest::Approx(1.0).epsilon(1e-3));
    }
    SUBCASE("too few samples") { CHECK_THROWS_AS(effective_rank(Tensor::matrix(3, 4)), DomainError); }
}

TEST_CASE("rollout error curve") {
    WorldSpec ws;
    ws.d_s = 2;
    ws.d_c = 2;
    ws.d_x = 6;
    GenerateOptions go;
    go.n_traj = 4;
    go.horizon = 10;
    const auto data = generate_dataset(build_world(ws), go);
    ModelConfig mc;
    mc.d_x = 6;
    mc.d_p = 2;
    mc.d_z = 4;
    mc.d_s = 2;
    mc.hidden = 8;
    TcwmModel m(mc, 1);
    const auto stats = compute_stats(data.proprio);
    SUBCASE("horizon 0") { CHECK(rollout_mse(m, data, stats, 0, 0, 4).empty()); }
    SUBCASE("horizon longer than the episodes") { CHECK_THROWS_AS(rollout_mse(m, data, stats, 10, 0, 4), DomainError); }
    SUBCASE("a model that predicts its constant encoding is perfect") {
        m.projector.weight.fill(0);
        for (std::size_t j = 0; j < 4; ++j) m.projector.bias[j] = Real(j) - 1.5f;
        auto& last = m.dynamics.layers.back();
        for (auto& l : m.dynamics.layers) l.weight.fill(0);
        last.bias = m.projector.bias;
        for (double v : rollout_mse(m, data, stats, 5, 0, 4)) CHECK(v == 0.0);
    }
    SUBCASE("one value per step") { CHECK(rollout_mse(m, data, stats, 3, 0, 4).size() == 3); }
}

TEST_CASE("ssim examples") {
    Rng rng(10);
    const Tensor img = uniform_matrix(1, 256, rng, 0, 1);
    CHECK(ssim(img.row(0), img.row(0), 16) == doctest::Approx(1.0));
    Tensor neg = img;
    for (auto& v : neg.values()) v = 1 - v;  // reflected about 0.5
    CHECK(ssim(img.row(0), neg.row(0), 16) <= 0.0);
    CHECK_THROWS(ssim(img.row(0), std::span<const Real>(neg.row(0).data(), 200), 16));
}

TEST_CASE("perturbations") {
    WorldSpec ws;
    ws.d_s = 2;
    ws.d_c = 2;
    ws.d_x = 8;
    GenerateOptions go;
    go.n_traj = 3;
    go.horizon = 10;
    go.renders = true;
    const auto data = generate_dataset(build_nav(ws, NavSpec{}), go);
    SUBCASE("gauss-noise sigma = 0 changes nothing") {
        PerturbOptions o;
        o.sigma = 0;
        const auto p = perturb(data, o);
        CHECK(p.embeddings.storage() == data.embeddings.storage());
        CHECK(p.renders.storage() == data.renders.storage());
        CHECK(p.proprio.storage() == data.proprio.storage());
    }
    SUBCASE("gauss-noise sigma = 0.1 has that spread") {
        PerturbOptions o;
        const auto p = perturb(data, o);
        double ss = 0;
        for (std::size_t i = 0; i < p.embeddings.size(); ++i) {
            const double d = p.embeddings[i] - data.embeddings[i];
            ss += d * d;
        }
        CHECK(std::sqrt(ss / double(p.embeddings.size())) == doctest::Approx(0.1).epsilon(0.1));
        for (Real v : p.renders.values()) {
            CHECK(v >= 0);
            CHECK(v <= 1);
        }
    }
    SUBCASE("channel jitter is deterministic and leaves labels alone") {
        PerturbOptions o;
        o.kind = PerturbKind::channel_jitter;
        o.seed = 3;
        const auto a = perturb(data, o), b = perturb(data, o);
        CHECK(a.embeddings.storage() == b.embeddings.storage());
        CHECK(a.embeddings.storage() != data.embeddings.storage());
        CHECK(a.latents.storage() == data.latents.storage());
        CHECK(a.actions.storage() == data.actions.storage());
    }
    SUBCASE("names") {
        CHECK(parse_perturb_kind(to_string(PerturbKind::channel_jitter)) == PerturbKind::channel_jitter);
        CHECK_THROWS_AS(parse_perturb_kind("blur"), ValidationError);
    }
}

}  // TEST_SUITE
