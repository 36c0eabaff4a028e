#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include <omp.h>

#include "tcwm/errors.hpp"
#include "tcwm/world.hpp"

using namespace tcwm;

namespace {

WorldSpec quiet_spec(std::size_t d_s, std::size_t d_c, std::size_t d_x) {
    WorldSpec s;
    s.d_s = d_s;
    s.d_c = d_c;
    s.d_x = d_x;
    s.sigma_x = 0;
    s.sigma_z = 0;
    return s;
}

void set_identity(Tensor& t) {
    t.fill(0);
    for (std::size_t i = 0; i < std::min(t.rows(), t.cols()); ++i) t(i, i) = 1;
}

bool same_batch(const TrajectoryBatch& a, const TrajectoryBatch& b) {
    auto eq = [](const Tensor& x, const Tensor& y) {
        return x.shape() == y.shape() && std::memcmp(x.data(), y.data(), x.size() * sizeof(Real)) == 0;
    };
    return eq(a.embeddings, b.embeddings) && eq(a.proprio, b.proprio) && eq(a.actions, b.actions) &&
           eq(a.latents, b.latents) && eq(a.renders, b.renders) && a.episode_starts == b.episode_starts;
}

}  // namespace

TEST_SUITE("synthworld") {

TEST_CASE("spec validation") {
    WorldSpec s;
    s.d_s = 0;
    CHECK_THROWS_AS(build_world(s), ValidationError);
    s = WorldSpec{};
    s.d_x = 8;
    CHECK_THROWS_AS(build_world(s), ValidationError);
    s = WorldSpec{};
    s.action_low = 1;
    CHECK_THROWS_AS(build_world(s), ValidationError);
    s = WorldSpec{};
    s.sigma_x = -1;
    CHECK_THROWS_AS(build_world(s), ValidationError);
    CHECK_THROWS_AS(parse_mixing_mode("cubic"), ValidationError);
    CHECK(parse_mixing_mode(to_string(MixingMode::tanh_mlp)) == MixingMode::tanh_mlp);
}

TEST_CASE("build_world is deterministic in the seed") {
    WorldSpec s;
    s.seed = 4;
    const World a = build_world(s), b = build_world(s);
    CHECK(a.mix.storage() == b.mix.storage());
    CHECK(a.dyn_a.storage() == b.dyn_a.storage());
    s.seed = 5;
    CHECK(build_world(s).mix.storage() != a.mix.storage());
}

TEST_CASE("actions never move the distractors") {
    const World w = build_world(WorldSpec{});
    for (std::size_t i = w.spec.d_s; i < w.d_z(); ++i)
        for (std::size_t j = 0; j < w.spec.d_a; ++j) CHECK(w.dyn_b(i, j) == 0);
    for (std::size_t i = w.spec.d_s; i < w.d_z(); ++i)
        for (std::size_t j = 0; j < w.spec.d_s; ++j) CHECK(w.dyn_a(i, j) == 0);
}

TEST_CASE("step_true examples") {
    Rng rng(0);
    SUBCASE("A = I, B = I") {
        World w = build_world(quiet_spec(2, 0, 2));
        set_identity(w.dyn_a);
        set_identity(w.dyn_b);
        const std::vector<Real> z{1, 0}, a{0, 1};
        CHECK(step_true(w, z, a, rng) == std::vector<Real>{1, 1});
    }
    SUBCASE("zero action with identity dynamics keeps z") {
        World w = build_world(quiet_spec(2, 2, 4));
        set_identity(w.dyn_a);
        const std::vector<Real> z{0.3f, -0.1f, 0.7f, 0.2f}, a{0, 0};
        CHECK(step_true(w, z, a, rng) == z);
    }
    SUBCASE("tanh-mlp dynamics fix the origin") {
        WorldSpec s = quiet_spec(4, 12, 64);
        s.dynamics = DynamicsMode::tanh_mlp;
        s.seed = 3;
        const World w = build_world(s);
        const std::vector<Real> z(16, 0), a(2, 0);
        for (Real v : step_true(w, z, a, rng)) CHECK(v == 0);
    }
    SUBCASE("process noise has the configured scale") {
        WorldSpec s = quiet_spec(2, 2, 4);
        s.sigma_z = 0.05;
        World w = build_world(s);
        const std::vector<Real> z(4, 0), a(2, 0);
        double s2 = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i)
            for (Real v : step_true(w, z, a, rng)) s2 += double(v) * v;
        CHECK(std::sqrt(s2 / (4.0 * n)) == doctest::Approx(0.05).epsilon(0.03));
    }
}

TEST_CASE("emit_embedding examples") {
    SUBCASE("identity mixing") {
        World w = build_world(quiet_spec(2, 2, 4));
        set_identity(w.mix);
        Rng rng(1);
        const std::vector<Real> z{0.1f, 0.2f, -0.3f, 0.4f};
        CHECK(emit_embedding(w, z, rng) == z);
    }
    SUBCASE("noise-free emission is deterministic") {
        const World w = build_world(quiet_spec(4, 12, 64));
        Rng r1(1), r2(2);
        const std::vector<Real> z(16, 0.5f);
        CHECK(emit_embedding(w, z, r1) == emit_embedding(w, z, r2));
    }
    SUBCASE("emission noise std") {
        WorldSpec s = quiet_spec(2, 2, 8);
        s.sigma_x = 0.1;
        const World w = build_world(s);
        const std::vector<Real> z{0.2f, -0.4f, 0.1f, 0.3f};
        const auto mean = mixing_mean(w, z);
        Rng rng(3);
        std::vector<double> s2(8, 0.0);
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            const auto x = emit_embedding(w, z, rng);
            for (std::size_t d = 0; d < 8; ++d) s2[d] += std::pow(double(x[d]) - mean[d], 2);
        }
        for (double v : s2) CHECK(std::fabs(std::sqrt(v / n) - 0.1) <= 0.01);
    }
    SUBCASE("tanh mixing is injective on sampled states") {
        WorldSpec s = quiet_spec(4, 12, 64);
        s.mixing = MixingMode::tanh_mlp;
        const World w = build_world(s);
        Rng rng(4);
        const auto z1 = sample_initial_state(w, rng), z2 = sample_initial_state(w, rng);
        CHECK(mixing_mean(w, z1) != mixing_mean(w, z2));
    }
}

TEST_CASE("proprio_of examples") {
    SUBCASE("identity") {
        const World w = build_world(quiet_spec(2, 0, 2));
        const std::vector<Real> zs{0.3f, -0.2f};
        CHECK(proprio_of(w, zs) == zs);
    }
    SUBCASE("scaled-shifted") {
        WorldSpec s = quiet_spec(2, 0, 2);
        s.proprio = ProprioMode::scaled_shifted;
        World w = build_world(s);
        w.proprio_scale = {2, 2};
        w.proprio_shift = {1, 1};
        const std::vector<Real> zs{1, 0};
        CHECK(proprio_of(w, zs) == std::vector<Real>{3, 1});
    }
    SUBCASE("smooth-monotone fixes 0 and inverts") {
        WorldSpec s = quiet_spec(3, 0, 3);
        s.proprio = ProprioMode::smooth_monotone;
        const World w = build_world(s);
        for (Real v : proprio_of(w, std::vector<Real>(3, 0))) CHECK(v == doctest::Approx(0.0));
        const std::vector<Real> zs{0.7f, -0.3f, 0.05f};
        const auto back = proprio_inverse(w, proprio_of(w, zs));
        for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(zs[i]).epsilon(1e-5));
    }
}

TEST_CASE("action box") {
    const WorldSpec s;
    CHECK(action_in_box(s, std::vector<Real>{-1, 1}));
    CHECK_FALSE(action_in_box(s, std::vector<Real>{0, 1.01f}));
}

TEST_CASE("nav world mechanics") {
    WorldSpec s = quiet_spec(2, 2, 8);
    const NavEnv env = build_nav(s, NavSpec{});
    SUBCASE("walls block crossing motion") {
        const auto p = nav_move(env, {-0.05f, 0.0f}, {0.1, 0.0});
        CHECK(p[0] < 0);
        const auto q = nav_move(env, {-0.05f, 0.0f}, {0.0, 0.1});
        CHECK(q[1] == doctest::Approx(0.1));
    }
    SUBCASE("motion above the wall is free") {
        const auto p = nav_move(env, {-0.05f, 0.6f}, {0.1, 0.0});
        CHECK(p[0] == doctest::Approx(0.05));
    }
    SUBCASE("bounds clamp") {
        const auto p = nav_move(env, {0.98f, 0.0f}, {0.1, 0.0});
        CHECK(p[0] <= 1.0f);
    }
    SUBCASE("free positions avoid walls") {
        Rng rng(2);
        for (int i = 0; i < 200; ++i) CHECK_FALSE(position_inside_wall(env, sample_free_position(env, rng)));
    }
    SUBCASE("step_nav scales the action") {
        Rng rng(0);
        const std::vector<Real> z{0.5f, 0.5f, 0.1f, 0.2f}, a{1, -1};
        const auto next = step_nav(env, z, a, rng);
        CHECK(next[0] == doctest::Approx(0.6));
        CHECK(next[1] == doctest::Approx(0.4));
    }
}

TEST_CASE("render examples") {
    NavEnv env = build_nav(quiet_spec(2, 2, 8), NavSpec{{}, 0.1, 0.1});
    env.goal = {0.9f, 0.9f};
    const std::vector<Real> center{0, 0, 0, 0};
    const auto img = render(env, center);
    CHECK(img.size() == kRenderPixels);
    const auto best = std::size_t(std::max_element(img.begin(), img.end()) - img.begin());
    CHECK(best / kRenderSide >= 7);
    CHECK(best / kRenderSide <= 8);
    CHECK(best % kRenderSide >= 7);
    CHECK(best % kRenderSide <= 8);
    for (Real v : img) CHECK((v >= 0 && v <= 1));
    CHECK(render(env, center) == img);
    const std::vector<Real> moved{0.125f, 0, 0, 0};  // one cell to the right
    CHECK(render(env, moved) != img);
}

TEST_CASE("generate_dataset examples") {
    WorldSpec s;
    const World w = build_world(s);
    GenerateOptions opt;
    opt.n_traj = 4;
    opt.horizon = 10;
    SUBCASE("shape") {
        const auto b = generate_dataset(w, opt);
        CHECK(b.steps() == 40);
        CHECK(b.episodes() == 4);
        CHECK(b.episode_starts == std::vector<std::size_t>{0, 10, 20, 30});
        CHECK(b.embeddings.cols() == 64);
        CHECK(b.proprio.cols() == 4);
        CHECK(b.latents.cols() == 16);
        CHECK_FALSE(b.has_renders());
    }
    SUBCASE("same seed twice") { CHECK(same_batch(generate_dataset(w, opt), generate_dataset(w, opt))); }
    SUBCASE("different seeds differ") {
        auto other = opt;
        other.seed = 1;
        CHECK_FALSE(same_batch(generate_dataset(w, opt), generate_dataset(w, other)));
    }
    SUBCASE("uniform actions are centred in the box") {
        opt.n_traj = 100;
        opt.horizon = 100;
        const auto b = generate_dataset(w, opt);
        for (std::size_t d = 0; d < 2; ++d) {
            double m = 0;
            for (std::size_t r = 0; r < b.steps(); ++r) m += b.actions(r, d);
            CHECK(std::fabs(m / double(b.steps())) < 0.05);
        }
        for (Real v : b.actions.values()) CHECK((v >= -1 && v <= 1));
    }
    SUBCASE("proprio follows the task block") {
        const auto b = generate_dataset(w, opt);
        for (std::size_t r = 0; r < b.steps(); ++r) {
            const auto sp = proprio_of(w, b.latents.row(r).first(4));
            for (std::size_t d = 0; d < 4; ++d) CHECK(b.proprio(r, d) == sp[d]);
        }
    }
    SUBCASE("invalid sizes") {
        opt.n_traj = 0;
        CHECK_THROWS_AS(generate_dataset(w, opt), DomainError);
    }
}

TEST_CASE("parallel generation matches the serial reference") {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(3);
    GenerateOptions opt;
    opt.n_traj = 9;
    opt.horizon = 12;
    opt.seed = 17;
    WorldSpec s;
    s.mixing = MixingMode::tanh_mlp;
    s.dynamics = DynamicsMode::tanh_mlp;
    const World w = build_world(s);
    CHECK(same_batch(generate_dataset(w, opt), generate_dataset_serial(w, opt)));

    WorldSpec ns;
    ns.d_s = 2;
    ns.d_c = 4;
    const NavEnv env = build_nav(ns, NavSpec{});
    opt.renders = true;
    for (Policy p : {Policy::uniform_random, Policy::goal_seeking}) {
        opt.policy = p;
        const auto par = generate_dataset(env, opt);
        CHECK(par.has_renders());
        CHECK(same_batch(par, generate_dataset_serial(env, opt)));
    }
    omp_set_num_threads(saved);
}

}  // TEST_SUITE
