#pragma once

// Synthetic ground-truth worlds.
//
// Latent state z = [z^s, z^c]: a task block z^s driven by actions and a
// distractor block z^c with its own action-free dynamics. Observations are
// a frozen mixing x = g(z) + sigma_x * eps (the stand-in for a frozen visual
// encoder) and proprioception s^p = m(z^s) with m a diffeomorphism.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcwm/nn.hpp"
#include "tcwm/rng.hpp"
#include "tcwm/tensor.hpp"

namespace tcwm {

enum class DynamicsMode { linear, tanh_mlp };
enum class MixingMode { linear, tanh_mlp };
enum class ProprioMode { identity, scaled_shifted, smooth_monotone };

std::string to_string(DynamicsMode m);
std::string to_string(MixingMode m);
std::string to_string(ProprioMode m);
DynamicsMode parse_dynamics_mode(const std::string& s);
MixingMode parse_mixing_mode(const std::string& s);
ProprioMode parse_proprio_mode(const std::string& s);

struct WorldSpec {
    std::size_t d_s = 4;
    std::size_t d_c = 12;
    std::size_t d_x = 64;
    std::size_t d_a = 2;
    DynamicsMode dynamics = DynamicsMode::linear;
    MixingMode mixing = MixingMode::linear;
    ProprioMode proprio = ProprioMode::identity;
    double sigma_x = 0.05;
    double sigma_z = 0.01;
    double action_low = -1.0;
    double action_high = 1.0;
    // Task block prior is uniform in [-state_bound, state_bound]^d_s.
    double state_bound = 1.0;
    std::uint64_t seed = 0;

    std::size_t d_z() const noexcept { return d_s + d_c; }
    void validate() const;
};

/// A WorldSpec with its seeded parameters materialised. Fields are public so
/// tests can install hand-picked matrices.
struct World {
    WorldSpec spec;
    Tensor dyn_a;       // [d_z x d_z]  linear mode
    Tensor dyn_b;       // [d_z x d_a]  linear mode (distractor rows are zero)
    MlpNet dyn_net;     // tanh-mlp mode, [d_z + d_a -> d_z], zero biases
    Tensor mix;         // [d_x x d_z]  linear mode
    MlpNet mix_net;     // tanh-mlp mode
    std::vector<Real> proprio_scale;  // positive diagonal, scaled-shifted mode
    std::vector<Real> proprio_shift;

    std::size_t d_z() const noexcept { return spec.d_z(); }
    std::size_t d_p() const noexcept { return spec.d_s; }
};

World build_world(const WorldSpec& spec);

bool action_in_box(const WorldSpec& spec, std::span<const Real> a);

// z' = A z + B a + sigma_z eta   or   net([z, a]) + sigma_z eta.
std::vector<Real> step_true(const World& world, std::span<const Real> z, std::span<const Real> a, Rng& rng);
// Distractor block update: z^c' = A_cc z^c + sigma_z eta (action-free).
void step_distractors(const World& world, std::span<const Real> z_c, std::span<Real> out, Rng& rng);

std::vector<Real> emit_embedding(const World& world, std::span<const Real> z, Rng& rng);
std::vector<Real> mixing_mean(const World& world, std::span<const Real> z);

std::vector<Real> proprio_of(const World& world, std::span<const Real> z_s);
// Numeric inverse of m by per-coordinate bisection (m is coordinate-wise monotone).
std::vector<Real> proprio_inverse(const World& world, std::span<const Real> s_p, double tol = 1e-7);

std::vector<Real> sample_initial_state(const World& world, Rng& rng);

// --- navigation world ---------------------------------------------------

struct WallSegment {
    double x0, y0, x1, y1;  // axis-aligned: x0 == x1 or y0 == y1
    bool vertical() const noexcept { return x0 == x1; }
};

/// Point-mass navigation: z^s is a 2-D position moved by step_scale * a and
/// clamped by walls and bounds; z^c are distractors.
struct NavEnv {
    World world;  // spec.d_s == 2
    std::vector<WallSegment> walls;
    double step_scale = 0.1;
    double goal_tolerance = 0.1;
    std::array<Real, 2> goal{0, 0};

    double bound() const noexcept { return world.spec.state_bound; }
};

struct NavSpec {
    std::vector<WallSegment> walls{{0.0, -0.4, 0.0, 0.4}};
    double step_scale = 0.1;
    double goal_tolerance = 0.1;
};

NavEnv build_nav(const WorldSpec& spec, const NavSpec& nav);

// Moves from p by delta, stopping at walls (the crossing component is
// removed) and at the bounds.
std::array<Real, 2> nav_move(const NavEnv& env, std::array<Real, 2> p, std::array<double, 2> delta);
std::vector<Real> step_nav(const NavEnv& env, std::span<const Real> z, std::span<const Real> a, Rng& rng);
std::array<Real, 2> sample_free_position(const NavEnv& env, Rng& rng);
bool position_inside_wall(const NavEnv& env, std::array<Real, 2> p);

inline constexpr std::size_t kRenderSide = 16;
inline constexpr std::size_t kRenderPixels = kRenderSide * kRenderSide;

// 16x16 grayscale rasterisation (row-major, row 0 at y = -bound).
std::vector<Real> render(const NavEnv& env, std::span<const Real> z);

// --- datasets -----------------------------------------------------------

enum class Policy { uniform_random, goal_seeking };
std::string to_string(Policy p);
Policy parse_policy(const std::string& s);

struct TrajectoryBatch {
    Tensor embeddings;  // [N x d_x]
    Tensor proprio;     // [N x d_p]
    Tensor actions;     // [N x d_a], action t moves step t to step t+1
    Tensor latents;     // [N x d_z] ground truth
    Tensor renders;     // [N x 256] or empty
    std::vector<std::size_t> episode_starts;

    std::size_t steps() const noexcept { return embeddings.rows(); }
    std::size_t episodes() const noexcept { return episode_starts.size(); }
    std::size_t episode_begin(std::size_t e) const { return episode_starts.at(e); }
    std::size_t episode_end(std::size_t e) const {
        return e + 1 < episode_starts.size() ? episode_starts[e + 1] : steps();
    }
    bool has_renders() const noexcept { return !renders.empty(); }

    // Episodes [first, first + count) as a new batch.
    TrajectoryBatch select_episodes(std::size_t first, std::size_t count) const;
};

struct GenerateOptions {
    Policy policy = Policy::uniform_random;
    std::size_t n_traj = 64;
    std::size_t horizon = 50;
    std::uint64_t seed = 0;
    bool renders = false;  // nav only
};

// Trajectories run in parallel; each owns the stream derive_seed(seed, index).
TrajectoryBatch generate_dataset(const World& world, const GenerateOptions& opt);
TrajectoryBatch generate_dataset(const NavEnv& env, const GenerateOptions& opt);
// Single-threaded reference; bit-identical to the above.
TrajectoryBatch generate_dataset_serial(const World& world, const GenerateOptions& opt);
TrajectoryBatch generate_dataset_serial(const NavEnv& env, const GenerateOptions& opt);

}  // namespace tcwm
