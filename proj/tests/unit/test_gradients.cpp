// Built against the double-precision core so finite differences can resolve
// relative errors well below 1e-4.

#include <doctest.h>

#include <cmath>

#include "tcwm/nn.hpp"
#include "tcwm/training.hpp"
#include "test_util.hpp"

using namespace tcwm;

static_assert(sizeof(Real) == sizeof(double), "gradient suite needs the f64 core");

namespace {

struct TermCase {
    const char* name;
    LossWeights weights;
};

// One case per loss term with every other weight zeroed, plus the default mix.
std::vector<TermCase> term_cases() {
    const LossWeights zero{0, 0, 0, 0, 0, 0.3};
    std::vector<TermCase> out;
    auto with = [&](const char* name, auto set) {
        LossWeights w = zero;
        set(w);
        out.push_back({name, w});
    };
    with("dyn_z", [](LossWeights& w) { w.dyn_z = 1; });
    with("dyn_s", [](LossWeights& w) { w.dyn_s = 1; });
    with("align", [](LossWeights& w) { w.align = 1; });
    with("rec", [](LossWeights& w) { w.rec = 1; });
    with("l1", [](LossWeights& w) { w.l1 = 1e-2; });
    out.push_back({"default", LossWeights{}});
    return out;
}

ModelConfig small_model(TrainMode mode, bool full_latent) {
    ModelConfig mc;
    mc.d_x = 6;
    mc.d_p = 3;
    mc.d_a = 2;
    mc.d_z = 5;
    mc.d_s = 2;
    mc.hidden = 8;
    mc.history = 1;
    mc.align_full_latent = full_latent;
    mc.direct_embedding = mode == TrainMode::direct_embedding;
    return mc;
}

// |w| has a kink at 0; central differences straddling it are meaningless, so
// g_phi weights closer than `margin` to zero are pushed out to +-margin.
// Exact zeros (masked columns) stay put: both sides agree there.
void clear_l1_kinks(TcwmModel& model, double margin) {
    for (Real& w : model.align_head.weight.values()) {
        if (w != 0 && std::fabs(w) < margin) w = std::copysign(Real(margin), w);
    }
}

}  // namespace

TEST_SUITE("gradients") {

TEST_CASE("grad_check examples") {
    SUBCASE("quadratic is exact under central differences") {
        std::vector<Real> w{3}, g{6};
        const std::vector<ParamRef> p{{"w", w, g}};
        const auto rep = grad_check([&] { return w[0] * w[0]; }, p, 1e-3);
        CHECK(rep.max_rel_error <= 1e-8);
        CHECK(rep.checked == 1);
    }
    SUBCASE("sum of tanh(w x)") {
        Rng rng(5);
        const Tensor x = test::random_matrix(1, 6, rng);
        Tensor w = test::random_matrix(1, 6, rng), g = Tensor::matrix(1, 6);
        for (std::size_t i = 0; i < 6; ++i) g[i] = x[i] * (1 - std::pow(std::tanh(w[i] * x[i]), 2));
        const std::vector<ParamRef> p{{"w", w.values(), g.values()}};
        const auto rep = grad_check(
            [&] {
                double s = 0;
                for (std::size_t i = 0; i < 6; ++i) s += std::tanh(w[i] * x[i]);
                return s;
            },
            p, 1e-3);
        CHECK(rep.max_rel_error <= 1e-4);
    }
    SUBCASE("constant function") {
        std::vector<Real> w{1, 2}, g{0, 0};
        const std::vector<ParamRef> p{{"w", w, g}};
        CHECK(grad_check([] { return 4.0; }, p, 1e-3).max_rel_error == 0.0);
    }
    SUBCASE("a wrong gradient is reported") {
        std::vector<Real> w{3}, g{5};
        const std::vector<ParamRef> p{{"w", w, g}};
        const auto rep = grad_check([&] { return w[0] * w[0]; }, p, 1e-3);
        CHECK(rep.max_rel_error == doctest::Approx(0.2));  // |5 - 6| / max(1, 5)
        CHECK(rep.worst_param == "w");
    }
}

TEST_CASE("two-layer tanh net matches finite differences") {
    Rng rng(11);
    auto net = MlpNet::random({4, 7, 3}, rng);
    const Tensor x = test::random_matrix(5, 4, rng), up = test::random_matrix(5, 3, rng);
    backprop(net, x, up);
    auto params = net.params("net");
    const auto loss = [&] {
        const Tensor y = net.forward(x);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
        return s;
    };
    CHECK(grad_check(loss, params, 1e-3).max_rel_error <= 1e-5);
}

TEST_CASE("total loss gradients for every term and mode") {
    for (bool full_latent : {false, true}) {
        for (auto mode : {TrainMode::tcwm, TrainMode::no_align, TrainMode::no_rec, TrainMode::direct_embedding}) {
            for (const auto& tc : term_cases()) {
                double worst = 0;
                for (std::uint64_t seed = 0; seed < 50; ++seed) {
                    const ModelConfig mc = small_model(mode, full_latent);
                    TcwmModel model(mc, seed);
                    clear_l1_kinks(model, 1e-2);
                    const auto wb = test::random_windows(mc, 6, seed);
                    LossOptions opt;
                    opt.mode = mode;
                    opt.weights = tc.weights;
                    model.zero_grad();
                    total_loss(model, wb, opt, true);
                    const auto frozen = detached_targets(model, wb);
                    auto params = model.params();
                    const auto rep = grad_check(
                        [&] { return total_loss(model, wb, opt, false, &frozen).total; }, params, 1e-4);
                    worst = std::max(worst, rep.max_rel_error);
                }
                const std::string label = to_string(mode) + " term " + tc.name + (full_latent ? " full-z" : " slice");
                INFO(label);
                CHECK(worst <= 1e-4);
            }
        }
    }
}

TEST_CASE("info_nce gradients with and without the positive in the denominator") {
    for (bool include : {true, false}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            Tensor u = test::random_matrix(5, 4, rng), v = test::random_matrix(5, 4, rng);
            Tensor gu, gv;
            info_nce(u, v, 0.3, include, &gu, &gv);
            const std::vector<ParamRef> p{{"u", u.values(), gu.values()}, {"v", v.values(), gv.values()}};
            const auto rep = grad_check([&] { return info_nce(u, v, 0.3, include); }, p, 1e-4);
            CHECK(rep.max_rel_error <= 1e-6);
        }
    }
}

}  // TEST_SUITE
