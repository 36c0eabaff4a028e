#include "tcwm/model.hpp"

#include <algorithm>
#include <cmath>

#include "tcwm/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tcwm {

void ModelConfig::validate() const {
    if (d_x == 0 || d_p == 0 || d_a == 0 || d_z == 0) throw ValidationError("model: dimensions must be positive");
    if (d_s == 0 || d_s > d_z) throw ValidationError("model: need 1 <= d_s <= d_z");
    if (hidden == 0) throw ValidationError("model: hidden width must be positive");
}

json ModelConfig::to_json() const {
    return {{"d_x", d_x},         {"d_p", d_p},
            {"d_a", d_a},         {"d_z", d_z},
            {"d_s", d_s},         {"d_pe", pe_dim()},
            {"align_dim", align_out()}, {"history", history},
            {"hidden", hidden},   {"depth", depth},
            {"align_full_latent", align_full_latent},
            {"direct_embedding", direct_embedding},
            {"visual_decoder", visual_decoder},
            {"render_pixels", render_pixels}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.d_x = j.at("d_x");
    c.d_p = j.at("d_p");
    c.d_a = j.at("d_a");
    c.d_z = j.at("d_z");
    c.d_s = j.at("d_s");
    c.d_pe = j.at("d_pe");
    c.align_dim = j.at("align_dim");
    c.history = j.at("history");
    c.hidden = j.at("hidden");
    c.depth = j.at("depth");
    c.align_full_latent = j.at("align_full_latent");
    c.direct_embedding = j.at("direct_embedding");
    c.visual_decoder = j.at("visual_decoder");
    c.render_pixels = j.at("render_pixels");
    return c;
}

namespace {

std::vector<std::size_t> mlp_widths(std::size_t in, std::size_t hidden, std::size_t depth, std::size_t out) {
    std::vector<std::size_t> w{in};
    for (std::size_t i = 0; i < depth; ++i) w.push_back(hidden);
    w.push_back(out);
    return w;
}

void require_cols(const Tensor& t, std::size_t cols, const char* what) {
    if (t.rank() == 0 || t.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected last dimension " + std::to_string(cols) + ", got " +
                             shape_string(t.shape()));
    }
}

}  // namespace

TcwmModel::TcwmModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    config_.d_pe = config_.pe_dim();
    config_.align_dim = config_.align_out();
    Rng rng(derive_seed(seed, 0x6d6f64656c));
    const auto& c = config_;
    const std::size_t latent = c.latent_dim();
    proprio_embedder = AffineLayer::random(c.d_p, c.pe_dim(), rng);
    projector = AffineLayer::random(c.joint_dim(), c.d_z, rng);
    align_head = AffineLayer::random(c.d_z, c.align_out(), rng);
    proprio_head = AffineLayer::random(c.d_p, c.align_out(), rng);
    dynamics = MlpNet::random(mlp_widths(c.window_dim(), c.hidden, c.depth, latent), rng);
    tc_dynamics = MlpNet::random(mlp_widths(c.window_dim(), c.hidden, c.depth, c.d_p), rng);
    embed_decoder = AffineLayer::random(c.d_z, c.joint_dim(), rng);
    if (c.visual_decoder) visual_decoder = MlpNet::random({c.d_x, c.hidden, c.render_pixels}, rng);
    apply_align_mask();
}

Tensor TcwmModel::embed_joint(const Tensor& x_vis, const Tensor& s_std) const {
    require_cols(x_vis, config_.d_x, "embed_joint visual embedding");
    require_cols(s_std, config_.d_p, "embed_joint proprioception");
    if (x_vis.rows() != s_std.rows()) throw DimensionError("embed_joint: row counts differ");
    const Tensor pe = proprio_embedder.forward(s_std);
    const std::size_t n = x_vis.rows(), dx = config_.d_x, dpe = config_.pe_dim();
    Tensor joint = Tensor::matrix(n, dx + dpe);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(x_vis.row(r).data(), dx, joint.row(r).data());
        std::copy_n(pe.row(r).data(), dpe, joint.row(r).data() + dx);
    }
    return joint;
}

Tensor TcwmModel::encode(const Tensor& joint) const {
    require_cols(joint, config_.joint_dim(), "encode");
    if (config_.direct_embedding) return joint;
    return projector.forward(joint);
}

Tensor TcwmModel::encode_observation(const Tensor& x_vis, const Tensor& s_std) const {
    return encode(embed_joint(x_vis, s_std));
}

Tensor pack_window(const Tensor& z_window, const Tensor& a_window, std::size_t steps) {
    const std::size_t dz = z_window.cols(), da = a_window.cols();
    if (z_window.rows() % steps != 0 || a_window.rows() != z_window.rows()) {
        throw DimensionError("window length mismatch: latents " + shape_string(z_window.shape()) + ", actions " +
                             shape_string(a_window.shape()) + ", expected " + std::to_string(steps) + " steps");
    }
    const std::size_t b = z_window.rows() / steps;
    Tensor packed = Tensor::matrix(b, steps * (dz + da));
    for (std::size_t i = 0; i < b; ++i) {
        Real* out = packed.row(i).data();
        for (std::size_t k = 0; k < steps; ++k) {
            out = std::copy_n(z_window.row(i * steps + k).data(), dz, out);
            out = std::copy_n(a_window.row(i * steps + k).data(), da, out);
        }
    }
    return packed;
}

namespace {

void check_window(const Tensor& z_window, const Tensor& a_window, const ModelConfig& c) {
    const std::size_t steps = c.window_steps();
    const bool single = z_window.rank() == 2;
    const bool batched = z_window.rank() == 3;
    if (!(single || batched) || a_window.rank() != z_window.rank()) {
        throw DimensionError("window tensors must be [H+1 x d] or [B x H+1 x d]");
    }
    const std::size_t len = z_window.shape()[z_window.rank() - 2];
    const std::size_t alen = a_window.shape()[a_window.rank() - 2];
    if (len != steps || alen != steps) {
        throw DimensionError("window length mismatch: got " + std::to_string(len) + " latents and " +
                             std::to_string(alen) + " actions, expected " + std::to_string(steps));
    }
    require_cols(z_window, c.latent_dim(), "window latents");
    require_cols(a_window, c.d_a, "window actions");
}

}  // namespace

Tensor TcwmModel::predict_next(const Tensor& z_window, const Tensor& a_window) const {
    check_window(z_window, a_window, config_);
    return predict_next_packed(pack_window(z_window, a_window, config_.window_steps()));
}

Tensor TcwmModel::predict_proprio(const Tensor& z_window, const Tensor& a_window) const {
    check_window(z_window, a_window, config_);
    return tc_dynamics.forward(pack_window(z_window, a_window, config_.window_steps()));
}

Tensor TcwmModel::predict_next_packed(const Tensor& windows) const {
    require_cols(windows, config_.window_dim(), "predict_next");
    return dynamics.forward(windows);
}

Tensor TcwmModel::decode_embedding(const Tensor& z) const {
    require_cols(z, config_.d_z, "decode_embedding");
    return embed_decoder.forward(z);
}

Tensor TcwmModel::align_input(const Tensor& z) const {
    require_cols(z, config_.d_z, "align_input");
    if (config_.align_full_latent) return z;
    Tensor masked = z;
    for (std::size_t r = 0; r < masked.rows(); ++r)
        for (std::size_t j = config_.d_s; j < masked.cols(); ++j) masked(r, j) = 0;
    return masked;
}

Tensor TcwmModel::align_features(const Tensor& z) const { return align_head.forward(align_input(z)); }

Tensor TcwmModel::proprio_features(const Tensor& s) const {
    require_cols(s, config_.d_p, "proprio_features");
    return proprio_head.forward(s);
}

Tensor TcwmModel::task_block(const Tensor& z) const {
    require_cols(z, latent_dim(), "task_block");
    const std::size_t ds = std::min(config_.d_s, latent_dim());
    Tensor out = Tensor::matrix(z.rows(), ds);
    for (std::size_t r = 0; r < z.rows(); ++r) std::copy_n(z.row(r).data(), ds, out.row(r).data());
    return out;
}

Tensor TcwmModel::complement_block(const Tensor& z) const {
    require_cols(z, latent_dim(), "complement_block");
    const std::size_t ds = std::min(config_.d_s, latent_dim());
    const std::size_t dc = latent_dim() - ds;
    Tensor out = Tensor::matrix(z.rows(), dc);
    for (std::size_t r = 0; r < z.rows(); ++r) std::copy_n(z.row(r).data() + ds, dc, out.row(r).data());
    return out;
}

std::vector<std::size_t> TcwmModel::effective_split(double threshold) const {
    const std::size_t dz = align_head.in_dim();
    std::vector<double> norms(dz, 0.0);
    for (std::size_t o = 0; o < align_head.out_dim(); ++o)
        for (std::size_t j = 0; j < dz; ++j) norms[j] += double(align_head.weight(o, j)) * align_head.weight(o, j);
    for (auto& n : norms) n = std::sqrt(n);
    const double peak = norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
    std::vector<std::size_t> selected;
    if (peak <= 0.0) return selected;
    for (std::size_t j = 0; j < dz; ++j) {
        if (norms[j] > threshold * peak) selected.push_back(j);
    }
    return selected;
}

void TcwmModel::apply_align_mask() {
    if (config_.align_full_latent) return;
    for (std::size_t o = 0; o < align_head.out_dim(); ++o) {
        for (std::size_t j = config_.d_s; j < align_head.in_dim(); ++j) {
            align_head.weight(o, j) = 0;
            align_head.grad_weight(o, j) = 0;
        }
    }
}

std::vector<ParamRef> TcwmModel::params() {
    std::vector<ParamRef> out;
    auto add = [&](std::vector<ParamRef> p) { out.insert(out.end(), p.begin(), p.end()); };
    add(proprio_embedder.params("proprio_embedder"));
    add(projector.params("projector"));
    add(align_head.params("align_head"));
    add(proprio_head.params("proprio_head"));
    add(dynamics.params("dynamics"));
    add(tc_dynamics.params("tc_dynamics"));
    add(embed_decoder.params("embed_decoder"));
    return out;
}

std::vector<ParamRef> TcwmModel::visual_params() { return visual_decoder.params("visual_decoder"); }

void TcwmModel::zero_grad() {
    proprio_embedder.zero_grad();
    projector.zero_grad();
    align_head.zero_grad();
    proprio_head.zero_grad();
    dynamics.zero_grad();
    tc_dynamics.zero_grad();
    embed_decoder.zero_grad();
    visual_decoder.zero_grad();
}

void save_checkpoint(const TcwmModel& model, const StandardizationStats& stats, const fs::path& dir,
                     const json& extra_meta) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(IoErrorKind::write_failed, "cannot create " + dir.string() + ": " + ec.message());
    // params() needs mutable access for the grad spans; values are only read.
    TcwmModel& m = const_cast<TcwmModel&>(model);
    auto all = m.params();
    const auto vis = m.visual_params();
    all.insert(all.end(), vis.begin(), vis.end());
    json components = json::object();
    for (const auto& p : all) {
        const std::string file = p.name + ".f32";
        write_f32(dir / file, p.value);
        components[p.name] = {{"file", file}, {"count", p.value.size()}};
    }
    json meta = extra_meta;
    meta["format"] = "tcwm-checkpoint";
    meta["version"] = 1;
    meta["dtype"] = kDtypeTag;
    meta["model"] = model.config().to_json();
    meta["stats"] = stats.to_json();
    meta["components"] = components;
    write_text_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
    Checkpoint ck;
    ck.meta = read_json(dir / "meta.json");
    try {
        if (ck.meta.at("dtype").get<std::string>() != kDtypeTag) {
            throw IoError(IoErrorKind::unsupported_dtype, "unsupported checkpoint dtype");
        }
        ck.model = TcwmModel(ModelConfig::from_json(ck.meta.at("model")), 0);
        ck.stats = StandardizationStats::from_json(ck.meta.at("stats"));
        auto all = ck.model.params();
        const auto vis = ck.model.visual_params();
        all.insert(all.end(), vis.begin(), vis.end());
        const auto& comps = ck.meta.at("components");
        for (auto& p : all) {
            if (!comps.contains(p.name)) {
                throw IoError(IoErrorKind::malformed_meta, "checkpoint lacks component '" + p.name + "'");
            }
            const auto& entry = comps[p.name];
            if (entry.at("count").get<std::size_t>() != p.value.size()) {
                throw IoError(IoErrorKind::byte_length, "component '" + p.name + "' has the wrong size");
            }
            const auto values = read_f32(dir / entry.at("file").get<std::string>(), p.value.size(), p.name);
            std::copy(values.begin(), values.end(), p.value.begin());
        }
    } catch (const json::exception& e) {
        throw IoError(IoErrorKind::malformed_meta, std::string("malformed checkpoint meta: ") + e.what());
    }
    return ck;
}

}  // namespace tcwm
