#include <doctest.h>

#include <fstream>

#include "tcwm/config.hpp"
#include "tcwm/errors.hpp"
#include "test_util.hpp"

using namespace tcwm;
using nlohmann::json;

namespace {

std::string validation_message(const json& j) {
    try {
        parse_config(j).validate();
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

json shipped(const std::string& name) {
    return load_config_json(std::filesystem::path(TCWM_SOURCE_DIR) / "configs" / name);
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("an empty config is the default") {
    const auto cfg = parse_config(json::object());
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.to_json() == default_config_json());
    CHECK(cfg.world.spec.d_s == 4);
    CHECK(cfg.world.spec.d_c == 12);
    CHECK(cfg.training.epochs == 100);
    CHECK(cfg.training.loss.weights.tau == doctest::Approx(0.3));
}

TEST_CASE("shipped configs round trip through parse and to_json") {
    for (const char* name : {"default.json", "nav.json", "tanh.json"}) {
        INFO(name);
        const json j = shipped(name);
        const auto cfg = parse_config(j);
        CHECK_NOTHROW(cfg.validate());
        CHECK(parse_config(cfg.to_json()).to_json() == cfg.to_json());
    }
    CHECK(shipped("default.json") == default_config_json());
}

TEST_CASE("unknown keys are all reported") {
    const std::string msg = validation_message(json{{"bogus", 1}, {"world", {{"d_q", 2}}}, {"model", {{"x", 0}}}});
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("world.d_q") != std::string::npos);
    CHECK(msg.find("model.x") != std::string::npos);
}

TEST_CASE("type errors") {
    CHECK_THROWS_AS(parse_config(json{{"seed", "zero"}}), ValidationError);
    CHECK_THROWS_AS(parse_config(json{{"world", {{"d_s", -1}}}}), ValidationError);
    CHECK_THROWS_AS(parse_config(json{{"training", {{"lr", true}}}}), ValidationError);
    CHECK_THROWS_AS(parse_config(json{{"world", 3}}), ValidationError);
    CHECK_THROWS_AS(parse_config(json{{"world", {{"kind", "ocean"}}}}), ValidationError);
    CHECK_THROWS_AS(parse_config(json{{"training", {{"mode", "tc"}}}}), ValidationError);
}

TEST_CASE("cross-field validation") {
    CHECK_FALSE(validation_message(json{{"world", {{"kind", "nav"}}}}).empty());  // nav needs d_s = 2
    CHECK(validation_message(json{{"world", {{"kind", "nav"}, {"d_s", 2}}}}).empty());
    CHECK_FALSE(validation_message(json{{"world", {{"renders", true}}}}).empty());
    CHECK_FALSE(validation_message(json{{"model", {{"visual_decoder", true}}}}).empty());
    CHECK_FALSE(validation_message(json{{"training", {{"batch", 1}}}}).empty());
    CHECK_FALSE(validation_message(json{{"eval", {{"folds", 1}}}}).empty());
    CHECK_FALSE(validation_message(json{{"sweep", {{"split_sizes", {0}}}}}).empty());
    CHECK_FALSE(validation_message(json{{"sweep", {{"split_sizes", {17}}}}}).empty());
    CHECK_FALSE(validation_message(json{{"model", {{"d_z", 4}, {"d_s", 5}}}}).empty());
}

TEST_CASE("model dimensions follow the world") {
    const auto cfg = parse_config(json{{"world", {{"d_s", 3}, {"d_c", 5}, {"d_x", 20}}}});
    const auto mc = cfg.resolved_model();
    CHECK(mc.d_x == 20);
    CHECK(mc.d_p == 3);
    CHECK(mc.d_a == 2);
    CHECK(mc.d_z == 8);
    CHECK(mc.d_s == 3);
    const auto explicit_dims = parse_config(json{{"model", {{"d_z", 10}, {"d_s", 2}}}}).resolved_model();
    CHECK(explicit_dims.d_z == 10);
    CHECK(explicit_dims.d_s == 2);
}

TEST_CASE("seeds derive per stage") {
    const auto a = parse_config(json{{"seed", 1}}), b = parse_config(json{{"seed", 2}});
    CHECK(a.resolved_training().seed != b.resolved_training().seed);
    CHECK(a.resolved_training().seed == parse_config(json{{"seed", 1}}).resolved_training().seed);
}

TEST_CASE("presets") {
    const auto names = preset_names();
    CHECK(names == std::vector<std::string>{"direct-embedding", "no-align", "no-rec", "split-sweep"});
    for (const auto& n : names) {
        json j = default_config_json();
        j.merge_patch(preset_overlay(n));
        CHECK_NOTHROW(parse_config(j).validate());
    }
    json j = default_config_json();
    j.merge_patch(preset_overlay("no-rec"));
    CHECK(parse_config(j).training.loss.mode == TrainMode::no_rec);
    CHECK_THROWS_AS(preset_overlay("no-dyn"), ValidationError);
}

TEST_CASE("file errors") {
    test::TempDir dir("cfg");
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ValidationError);
    std::ofstream(dir / "bad.json") << "{\"seed\": ";
    CHECK_THROWS_AS(load_config(dir / "bad.json"), ValidationError);
}

TEST_CASE("world builders") {
    const auto syn = parse_config(json::object());
    CHECK_THROWS_AS(make_nav(syn), ValidationError);
    const auto nav = parse_config(shipped("nav.json"));
    const NavEnv env = make_nav(nav);
    CHECK(env.world.spec.d_s == 2);
    CHECK_FALSE(env.walls.empty());
}

}  // TEST_SUITE
