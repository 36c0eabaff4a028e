#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "tcwm/datastore.hpp"
#include "tcwm/nn.hpp"
#include "tcwm/tensor.hpp"

namespace tcwm {

struct ModelConfig {
    std::size_t d_x = 64;  // visual embedding width
    std::size_t d_p = 4;   // proprioception width
    std::size_t d_a = 2;
    std::size_t d_z = 16;
    std::size_t d_s = 4;        // width of the task-centric slice (upper bound)
    std::size_t d_pe = 0;       // proprio embedding width, 0 means d_p
    std::size_t align_dim = 0;  // output width of both alignment heads, 0 means 2 * d_s
    std::size_t history = 1;    // H: the dynamics window spans H + 1 steps
    std::size_t hidden = 64;
    std::size_t depth = 1;      // hidden layers in the dynamics nets
    // false: g_phi only sees the leading d_s coordinates (columns beyond are
    // held at zero); true: g_phi reads the whole latent and l1 selects.
    bool align_full_latent = false;
    // Dynamics run on the joint embedding itself; projector and decoder unused.
    bool direct_embedding = false;
    bool visual_decoder = false;
    std::size_t render_pixels = 256;

    std::size_t pe_dim() const noexcept { return d_pe ? d_pe : d_p; }
    std::size_t align_out() const noexcept { return align_dim ? align_dim : 2 * d_s; }
    std::size_t joint_dim() const noexcept { return d_x + pe_dim(); }
    std::size_t latent_dim() const noexcept { return direct_embedding ? joint_dim() : d_z; }
    std::size_t window_steps() const noexcept { return history + 1; }
    std::size_t window_dim() const noexcept { return window_steps() * (latent_dim() + d_a); }
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

/// Trainable components. The frozen visual encoder is not part of the model:
/// inputs are embeddings and proprioception, never images.
class TcwmModel {
public:
    TcwmModel() = default;
    TcwmModel(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }
    std::size_t latent_dim() const noexcept { return config_.latent_dim(); }

    // x = [x_vis, f_emb(s_p)]; s_p already standardised.
    Tensor embed_joint(const Tensor& x_vis, const Tensor& s_std) const;
    // z = projector(x); identity in direct-embedding mode.
    Tensor encode(const Tensor& joint) const;
    Tensor encode_observation(const Tensor& x_vis, const Tensor& s_std) const;

    // Windows are [B x (H+1) x d] (or [(H+1) x d] for a single window).
    Tensor predict_next(const Tensor& z_window, const Tensor& a_window) const;
    Tensor predict_proprio(const Tensor& z_window, const Tensor& a_window) const;
    // Same, on packed windows [B x window_dim].
    Tensor predict_next_packed(const Tensor& windows) const;

    Tensor decode_embedding(const Tensor& z) const;
    // Input of g_phi: z itself, or z with coordinates beyond d_s zeroed in slice mode.
    Tensor align_input(const Tensor& z) const;
    Tensor align_features(const Tensor& z) const;     // g_phi(align_input(z))
    Tensor proprio_features(const Tensor& s) const;   // h_psi(s)
    Tensor task_block(const Tensor& z) const;         // leading d_s coordinates
    Tensor complement_block(const Tensor& z) const;   // remaining coordinates

    // Latent indices whose g_phi column norm exceeds threshold * max column norm.
    std::vector<std::size_t> effective_split(double threshold) const;

    // Keeps g_phi columns outside the slice at zero (slice mode only).
    void apply_align_mask();

    std::vector<ParamRef> params();         // every world-model parameter
    std::vector<ParamRef> visual_params();  // f_vis only
    void zero_grad();

    AffineLayer proprio_embedder;  // f^p_emb
    AffineLayer projector;         // q
    AffineLayer align_head;        // g_phi
    AffineLayer proprio_head;      // h_psi
    MlpNet dynamics;               // f_theta
    MlpNet tc_dynamics;            // f^p_eta
    AffineLayer embed_decoder;     // f_dec
    MlpNet visual_decoder;         // f_vis (optional)

private:
    ModelConfig config_;
};

// [B x (H+1) x d_z], [B x (H+1) x d_a] -> [B x (H+1)(d_z + d_a)]
Tensor pack_window(const Tensor& z_window, const Tensor& a_window, std::size_t steps);

struct Checkpoint {
    TcwmModel model;
    StandardizationStats stats;
    nlohmann::json meta;
};

void save_checkpoint(const TcwmModel& model, const StandardizationStats& stats, const std::filesystem::path& dir,
                     const nlohmann::json& extra_meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace tcwm
