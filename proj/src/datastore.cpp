#include "tcwm/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tcwm/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tcwm {
namespace {

static_assert(sizeof(float) == 4);

std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
}

fs::path temp_name(const fs::path& file) { return fs::path(file.string() + ".tmp"); }

void commit(const fs::path& tmp, const fs::path& file) {
    std::error_code ec;
    fs::rename(tmp, file, ec);
    if (ec) throw IoError(IoErrorKind::write_failed, "cannot rename " + tmp.string() + ": " + ec.message());
}

struct ArrayEntry {
    const char* name;
    Tensor TrajectoryBatch::*member;
    bool optional;
};

constexpr ArrayEntry kArrays[] = {
    {"embeddings", &TrajectoryBatch::embeddings, false},
    {"proprio", &TrajectoryBatch::proprio, false},
    {"actions", &TrajectoryBatch::actions, false},
    {"latents", &TrajectoryBatch::latents, false},
    {"renders", &TrajectoryBatch::renders, true},
};

}  // namespace

void write_f32(const fs::path& file, std::span<const Real> values) {
    std::vector<std::uint32_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        words[i] = to_little(std::bit_cast<std::uint32_t>(f));
    }
    const auto tmp = temp_name(file);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(IoErrorKind::write_failed, "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
        if (!out) throw IoError(IoErrorKind::write_failed, "short write to " + tmp.string());
    }
    commit(tmp, file);
}

std::vector<Real> read_f32(const fs::path& file, std::size_t expected_count, const std::string& name) {
    std::error_code ec;
    if (!fs::exists(file, ec)) throw IoError(IoErrorKind::missing_file, "missing array file for '" + name + "': " + file.string());
    const auto bytes = fs::file_size(file, ec);
    if (ec) throw IoError(IoErrorKind::missing_file, "cannot stat " + file.string());
    if (bytes != expected_count * 4) {
        throw IoError(IoErrorKind::byte_length, "array '" + name + "' has " + std::to_string(bytes) +
                                                    " bytes, expected " + std::to_string(expected_count * 4));
    }
    std::vector<std::uint32_t> words(expected_count);
    std::ifstream in(file, std::ios::binary);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError(IoErrorKind::byte_length, "short read of array '" + name + "'");
    std::vector<Real> values(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i) values[i] = static_cast<Real>(std::bit_cast<float>(to_little(words[i])));
    return values;
}

void write_text_atomic(const fs::path& file, const std::string& text) {
    std::error_code ec;
    if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
    if (ec) throw IoError(IoErrorKind::write_failed, "cannot create " + file.parent_path().string() + ": " + ec.message());
    const auto tmp = temp_name(file);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(IoErrorKind::write_failed, "cannot open " + tmp.string() + " for writing");
        out << text;
        if (!out) throw IoError(IoErrorKind::write_failed, "short write to " + tmp.string());
    }
    commit(tmp, file);
}

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError(IoErrorKind::missing_file, "missing file " + file.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError(IoErrorKind::malformed_meta, "malformed JSON in " + file.string() + ": " + e.what());
    }
}

void save_dataset(const TrajectoryBatch& batch, const fs::path& dir, const json& extra_meta) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(IoErrorKind::write_failed, "cannot create " + dir.string() + ": " + ec.message());

    json arrays = json::object();
    for (const auto& entry : kArrays) {
        const Tensor& t = batch.*entry.member;
        if (entry.optional && t.empty()) continue;
        if (t.rows() != batch.steps()) {
            throw DimensionError(std::string("save_dataset: array '") + entry.name + "' has " +
                                 std::to_string(t.rows()) + " rows, expected " + std::to_string(batch.steps()));
        }
        const std::string file = std::string(entry.name) + ".f32";
        write_f32(dir / file, t.values());
        arrays[entry.name] = {{"file", file}, {"shape", {t.rows(), t.cols()}}};
    }
    write_text_atomic(dir / "boundaries.json", json{{"episode_starts", batch.episode_starts}}.dump(2) + "\n");

    json meta = extra_meta;
    meta["format"] = "tcwm-dataset";
    meta["version"] = 1;
    meta["dtype"] = kDtypeTag;
    meta["counts"] = {{"steps", batch.steps()}, {"episodes", batch.episodes()}};
    meta["dims"] = {{"d_x", batch.embeddings.cols()},
                    {"d_p", batch.proprio.cols()},
                    {"d_a", batch.actions.cols()},
                    {"d_z", batch.latents.cols()}};
    meta["arrays"] = arrays;
    write_text_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

json load_dataset_meta(const fs::path& dir) {
    const json meta = read_json(dir / "meta.json");
    try {
        const std::string dtype = meta.at("dtype").get<std::string>();
        if (dtype != kDtypeTag) {
            throw IoError(IoErrorKind::unsupported_dtype, "unsupported dtype '" + dtype + "' (expected f32le)");
        }
        const auto steps = meta.at("counts").at("steps").get<std::size_t>();
        for (const auto& entry : kArrays) {
            if (!meta.at("arrays").contains(entry.name)) {
                if (entry.optional) continue;
                throw IoError(IoErrorKind::malformed_meta, std::string("meta.json lacks array '") + entry.name + "'");
            }
            const auto shape = meta["arrays"][entry.name].at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2 || shape[0] != steps) {
                throw IoError(IoErrorKind::malformed_meta, std::string("bad shape for array '") + entry.name + "'");
            }
        }
    } catch (const json::exception& e) {
        throw IoError(IoErrorKind::malformed_meta, std::string("malformed meta.json: ") + e.what());
    }
    return meta;
}

TrajectoryBatch load_dataset(const fs::path& dir) {
    const json meta = load_dataset_meta(dir);
    TrajectoryBatch batch;
    for (const auto& entry : kArrays) {
        if (!meta["arrays"].contains(entry.name)) continue;
        const auto& a = meta["arrays"][entry.name];
        const auto shape = a["shape"].get<Shape>();
        const auto file = a.at("file").get<std::string>();
        batch.*entry.member = Tensor(shape, read_f32(dir / file, shape_product(shape), entry.name));
    }
    const json bounds = read_json(dir / "boundaries.json");
    try {
        batch.episode_starts = bounds.at("episode_starts").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw IoError(IoErrorKind::malformed_meta, std::string("malformed boundaries.json: ") + e.what());
    }
    if (batch.episode_starts.empty() || batch.episode_starts.front() != 0 ||
        !std::is_sorted(batch.episode_starts.begin(), batch.episode_starts.end()) ||
        batch.episode_starts.back() >= std::max<std::size_t>(batch.steps(), 1)) {
        throw IoError(IoErrorKind::malformed_meta, "boundaries.json is inconsistent with the step count");
    }
    return batch;
}

Tensor StandardizationStats::standardize(const Tensor& x) const {
    if (x.cols() != dims()) throw DimensionError("standardize: expected " + std::to_string(dims()) + " columns");
    Tensor out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) standardize_inplace(out.row(r));
    return out;
}

void StandardizationStats::standardize_inplace(std::span<Real> row) const {
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = static_cast<Real>((row[c] - mean[c]) / std[c]);
}

Tensor StandardizationStats::unstandardize(const Tensor& x) const {
    if (x.cols() != dims()) throw DimensionError("unstandardize: expected " + std::to_string(dims()) + " columns");
    Tensor out = x;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < dims(); ++c) out(r, c) = static_cast<Real>(out(r, c) * std[c] + mean[c]);
    return out;
}

json StandardizationStats::to_json() const { return {{"mean", mean}, {"std", std}}; }

StandardizationStats StandardizationStats::from_json(const json& j) {
    StandardizationStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
    if (s.mean.size() != s.std.size()) throw IoError(IoErrorKind::malformed_meta, "stats mean/std length mismatch");
    return s;
}

StandardizationStats compute_stats(const Tensor& samples) {
    if (samples.rows() == 0) throw DomainError("compute_stats: empty batch");
    const std::size_t n = samples.rows(), d = samples.cols();
    StandardizationStats s;
    s.mean.assign(d, 0.0);
    s.std.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) s.mean[c] += samples(r, c);
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            const double dv = samples(r, c) - s.mean[c];
            s.std[c] += dv * dv;
        }
    for (auto& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n)), StandardizationStats::kStdFloor);
    return s;
}

}  // namespace tcwm
