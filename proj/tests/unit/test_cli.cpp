#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tcwm/commands.hpp"
#include "tcwm/datastore.hpp"
#include "tcwm/errors.hpp"
#include "tcwm/report.hpp"
#include "test_util.hpp"

using namespace tcwm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_config(const fs::path& out) {
    return json{{"world", {{"d_s", 2}, {"d_c", 2}, {"d_x", 8}, {"episodes", 6}, {"horizon", 12}}},
                {"model", {{"hidden", 8}}},
                {"training", {{"epochs", 2}, {"batch", 8}}},
                {"eval", {{"a1_pairs", 64}, {"a2_pairs", 64}, {"folds", 2}, {"rollout_horizon", 2}}},
                {"output", out.string()},
                {"seed", 3}};
}

fs::path write_config(const fs::path& file, const json& j) {
    std::ofstream(file) << j.dump(2);
    return file;
}

std::string slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Relative path -> bytes for every regular file under dir.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TCWM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen writes a dataset that round trips") {
    test::TempDir dir("cli");
    const auto cfg = write_config(dir / "c.json", tiny_config(dir / "out"));
    const json summary = cmd_gen(cfg, dir / "data");
    const auto data = load_dataset(dir / "data");
    CHECK(data.episodes() == 6);
    CHECK(data.steps() == 72);
    CHECK(summary.at("steps") == 72);
    save_dataset(data, dir / "copy", load_dataset_meta(dir / "data"));
    CHECK(tree(dir / "data") == tree(dir / "copy"));
}

TEST_CASE("invalid input is rejected before anything is written") {
    test::TempDir dir("cli");
    json bad = tiny_config(dir / "out");
    bad["training"]["optimizer"] = "sgd";
    const auto cfg = write_config(dir / "bad.json", bad);
    CHECK_THROWS_AS(cmd_gen(cfg, dir / "data"), ValidationError);
    CHECK_THROWS_AS(cmd_ablate(cfg, "no-rec", dir / "abl"), ValidationError);
    CHECK_FALSE(fs::exists(dir / "data"));
    CHECK_FALSE(fs::exists(dir / "abl"));

    const auto good = write_config(dir / "good.json", tiny_config(dir / "out"));
    cmd_gen(good, dir / "data");
    json other = tiny_config(dir / "out");
    other["seed"] = 4;
    const auto mismatched = write_config(dir / "other.json", other);
    CHECK_THROWS_AS(cmd_train(mismatched, dir / "data", dir / "model"), ValidationError);
    CHECK_THROWS_AS(cmd_plan(dir / "data", std::nullopt, std::nullopt, dir / "plan"), IoError);
    CHECK_FALSE(fs::exists(dir / "model"));
    CHECK_FALSE(fs::exists(dir / "plan"));
}

TEST_CASE("same config and seed give byte-identical artifacts") {
    test::TempDir dir("cli");
    const auto cfg = write_config(dir / "c.json", tiny_config(dir / "out"));
    cmd_gen(cfg, dir / "d1");
    cmd_gen(cfg, dir / "d2");
    CHECK(tree(dir / "d1") == tree(dir / "d2"));

    cmd_train(cfg, dir / "d1", dir / "m1");
    cmd_train(cfg, dir / "d1", dir / "m2");
    const auto t1 = tree(dir / "m1");
    CHECK(t1 == tree(dir / "m2"));
    CHECK(t1.count("train_log.csv") == 1);
    CHECK(t1.count("train_report.json") == 1);
    CHECK(t1.count("loss.svg") == 1);

    cmd_probe(dir / "m1", dir / "d1", dir / "p1");
    cmd_probe(dir / "m1", dir / "d1", dir / "p2");
    CHECK(tree(dir / "p1") == tree(dir / "p2"));
    cmd_verify(dir / "m1", dir / "d1", dir / "v1");
    cmd_verify(dir / "m1", dir / "d1", dir / "v2");
    CHECK(tree(dir / "v1") == tree(dir / "v2"));
}

TEST_CASE("svg charts") {
    const LineChart chart{"loss", "epoch", "value", {}, true, {{"a", {1.0, 0.5, 0.25}}, {"b<&>", {2.0, NAN, 0.0}}}};
    const std::string svg = render_svg(chart);
    CHECK(svg == render_svg(chart));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("b&lt;&amp;&gt;") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("binary exit codes") {
    test::TempDir dir("cli");
    const auto cfg = write_config(dir / "c.json", tiny_config(dir / "out"));
    json bad = tiny_config(dir / "out");
    bad["world"]["colour"] = 1;
    const auto bad_cfg = write_config(dir / "bad.json", bad);
    std::ofstream(dir / "blocker") << "x";

    CHECK(run_cli("gen --config " + cfg.string() + " --out " + (dir / "data").string()) == 0);
    CHECK(run_cli("gen --config " + bad_cfg.string() + " --out " + (dir / "x").string()) == 1);
    CHECK(run_cli("gen --nonsense") == 1);
    CHECK(run_cli("ablate --config " + cfg.string() + " --preset no-dyn") == 1);
    CHECK(run_cli("probe --model " + (dir / "nope").string() + " --data " + (dir / "data").string()) == 1);
    // The output path runs through a regular file.
    CHECK(run_cli("gen --config " + cfg.string() + " --out " + (dir / "blocker" / "d").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "x"));
}

}  // TEST_SUITE
