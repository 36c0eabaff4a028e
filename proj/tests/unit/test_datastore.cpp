#include <doctest.h>

#include <cstring>
#include <fstream>

#include "tcwm/datastore.hpp"
#include "tcwm/errors.hpp"
#include "test_util.hpp"

using namespace tcwm;
namespace fs = std::filesystem;

namespace {

TrajectoryBatch random_batch(std::uint64_t seed, bool renders) {
    Rng rng(seed);
    TrajectoryBatch b;
    b.embeddings = test::random_matrix(30, 8, rng);
    b.proprio = test::random_matrix(30, 2, rng);
    b.actions = test::random_matrix(30, 2, rng);
    b.latents = test::random_matrix(30, 5, rng);
    if (renders) b.renders = test::random_matrix(30, 256, rng);
    b.episode_starts = {0, 10, 25};
    return b;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(Real)) == 0;
}

void truncate_file(const fs::path& f, std::size_t bytes) { fs::resize_file(f, bytes); }

}  // namespace

TEST_SUITE("datastore") {

TEST_CASE("round trip is bit-exact") {
    test::TempDir dir("ds");
    for (bool renders : {false, true}) {
        const auto b = random_batch(9, renders);
        save_dataset(b, dir / "d", {{"note", "x"}});
        const auto c = load_dataset(dir / "d");
        CHECK(bit_equal(b.embeddings, c.embeddings));
        CHECK(bit_equal(b.proprio, c.proprio));
        CHECK(bit_equal(b.actions, c.actions));
        CHECK(bit_equal(b.latents, c.latents));
        CHECK(bit_equal(b.renders, c.renders));
        CHECK(b.episode_starts == c.episode_starts);
        CHECK(load_dataset_meta(dir / "d").at("note") == "x");
        fs::remove_all(dir / "d");
    }
}

TEST_CASE("special float values survive") {
    test::TempDir dir("ds");
    auto b = random_batch(1, false);
    b.embeddings[0] = -0.0f;
    b.embeddings[1] = std::numeric_limits<Real>::denorm_min();
    b.embeddings[2] = std::numeric_limits<Real>::max();
    save_dataset(b, dir.path());
    CHECK(bit_equal(load_dataset(dir.path()).embeddings, b.embeddings));
}

TEST_CASE("files are little-endian float32 without header") {
    test::TempDir dir("ds");
    const auto b = random_batch(2, false);
    save_dataset(b, dir.path());
    CHECK(fs::file_size(dir / "proprio.f32") == 30 * 2 * 4);
    std::ifstream in(dir / "proprio.f32", std::ios::binary);
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    const std::uint32_t word = bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) | (std::uint32_t(bytes[3]) << 24);
    float f;
    std::memcpy(&f, &word, 4);
    CHECK(f == b.proprio[0]);
}

TEST_CASE("load errors") {
    test::TempDir dir("ds");
    const auto b = random_batch(3, false);
    SUBCASE("truncated array names the array") {
        save_dataset(b, dir.path());
        truncate_file(dir / "actions.f32", 10);
        try {
            load_dataset(dir.path());
            FAIL("expected a byte-length error");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrorKind::byte_length);
            CHECK(std::string(e.what()).find("actions") != std::string::npos);
        }
    }
    SUBCASE("unsupported dtype") {
        save_dataset(b, dir.path());
        auto meta = read_json(dir / "meta.json");
        meta["dtype"] = "f64le";
        write_text_atomic(dir / "meta.json", meta.dump());
        try {
            load_dataset(dir.path());
            FAIL("expected a dtype error");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrorKind::unsupported_dtype);
        }
    }
    SUBCASE("missing array file") {
        save_dataset(b, dir.path());
        fs::remove(dir / "latents.f32");
        try {
            load_dataset(dir.path());
            FAIL("expected a missing-file error");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrorKind::missing_file);
        }
    }
    SUBCASE("missing directory") {
        try {
            load_dataset(dir / "nope");
            FAIL("expected a missing-file error");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrorKind::missing_file);
        }
    }
    SUBCASE("malformed meta") {
        save_dataset(b, dir.path());
        write_text_atomic(dir / "meta.json", "{\"dtype\": \"f32le\"");
        CHECK_THROWS_AS(load_dataset(dir.path()), IoError);
        write_text_atomic(dir / "meta.json", "{\"dtype\": \"f32le\", \"counts\": {}}");
        try {
            load_dataset(dir.path());
            FAIL("expected malformed meta");
        } catch (const IoError& e) {
            CHECK(e.kind() == IoErrorKind::malformed_meta);
        }
    }
    SUBCASE("mismatched row counts are refused on save") {
        auto bad = b;
        bad.actions = Tensor::matrix(29, 2);
        CHECK_THROWS_AS(save_dataset(bad, dir.path()), DimensionError);
    }
}

TEST_CASE("compute_stats examples") {
    SUBCASE("population moments") {
        const auto s = compute_stats(Tensor({2, 1}, {1, 3}));
        CHECK(s.mean[0] == 2);
        CHECK(s.std[0] == 1);
    }
    SUBCASE("constant column hits the floor") {
        const auto s = compute_stats(Tensor({3, 1}, {5, 5, 5}));
        CHECK(s.mean[0] == 5);
        CHECK(s.std[0] == StandardizationStats::kStdFloor);
    }
    SUBCASE("round trip") {
        Rng rng(4);
        const Tensor x = test::random_matrix(50, 3, rng, 3.0);
        const auto s = compute_stats(x);
        const Tensor back = s.standardize(s.unstandardize(x));
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-6));
        const auto z = s.standardize(x);
        const auto zs = compute_stats(z);
        for (std::size_t d = 0; d < 3; ++d) {
            CHECK(zs.mean[d] == doctest::Approx(0).epsilon(1e-5));
            CHECK(zs.std[d] == doctest::Approx(1).epsilon(1e-5));
        }
    }
    SUBCASE("json round trip") {
        const auto s = compute_stats(Tensor({2, 2}, {1, 2, 3, 6}));
        const auto t = StandardizationStats::from_json(s.to_json());
        CHECK(t.mean == s.mean);
        CHECK(t.std == s.std);
    }
    SUBCASE("in-place matches batch standardisation") {
        const auto s = compute_stats(Tensor({2, 2}, {1, 2, 3, 6}));
        std::vector<Real> row{2, 4};
        s.standardize_inplace(row);
        const Tensor t = s.standardize(Tensor({1, 2}, {2, 4}));
        CHECK(row[0] == t[0]);
        CHECK(row[1] == t[1]);
    }
}

TEST_CASE("episode selection") {
    const auto b = random_batch(5, true);
    const auto s = b.select_episodes(1, 2);
    CHECK(s.steps() == 20);
    CHECK(s.episode_starts == std::vector<std::size_t>{0, 15});
    CHECK(s.embeddings(0, 0) == b.embeddings(10, 0));
    CHECK(s.renders.rows() == 20);
}

}  // TEST_SUITE
