#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tcwm/rng.hpp"
#include "tcwm/tensor.hpp"

namespace tcwm {

/// A named view of one parameter array and its gradient buffer.
struct ParamRef {
    std::string name;
    std::span<Real> value;
    std::span<Real> grad;
};

/// y = W x + b, broadcast over leading batch dimensions.
class AffineLayer {
public:
    AffineLayer() = default;
    AffineLayer(std::size_t in, std::size_t out);

    // Weights ~ N(0, gain^2 / in), zero bias.
    static AffineLayer random(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    Tensor forward(const Tensor& x) const;
    // Accumulates into grad_weight / grad_bias and returns dL/dx.
    Tensor backward(const Tensor& x, const Tensor& upstream);
    Tensor backward_input(const Tensor& upstream) const;

    void zero_grad();
    std::vector<ParamRef> params(const std::string& prefix);

    Tensor weight;  // [out x in]
    Tensor bias;    // [out]
    Tensor grad_weight;
    Tensor grad_bias;
};

Tensor affine_apply(const AffineLayer& layer, const Tensor& x);

/// Feed-forward net: tanh between layers, identity at the output.
class MlpNet {
public:
    // Input of every layer; the last entry is the net output.
    struct Cache {
        std::vector<Tensor> activations;
    };

    MlpNet() = default;
    explicit MlpNet(std::vector<AffineLayer> layers);

    // widths = {in, hidden..., out}
    static MlpNet random(const std::vector<std::size_t>& widths, Rng& rng, double gain = 1.0);

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    bool empty() const noexcept { return layers.empty(); }

    Tensor forward(const Tensor& x) const;
    Tensor forward(const Tensor& x, Cache& cache) const;
    // Accumulates parameter gradients and returns dL/dx.
    Tensor backward(const Cache& cache, const Tensor& upstream);

    void zero_grad();
    std::vector<ParamRef> params(const std::string& prefix);

    std::vector<AffineLayer> layers;
};

struct Backprop {
    std::vector<Tensor> weight_grads;
    std::vector<Tensor> bias_grads;
    Tensor input_grad;
};

// Fresh gradients of <upstream, net(x)> with respect to parameters and input.
Backprop backprop(MlpNet& net, const Tensor& x, const Tensor& upstream);

// --- Adam ---------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(std::vector<ParamRef> params, AdamConfig config);

    /// One bias-corrected update from the current grad buffers.
    /// Non-finite gradients throw before any parameter is touched. An
    /// all-zero gradient decays the moments and leaves parameters unchanged.
    void step();

    std::uint64_t steps() const noexcept { return step_; }
    const AdamConfig& config() const noexcept { return config_; }
    const std::vector<std::vector<Real>>& first_moments() const noexcept { return m_; }
    const std::vector<std::vector<Real>>& second_moments() const noexcept { return v_; }

private:
    std::vector<ParamRef> params_;
    AdamConfig config_;
    std::vector<std::vector<Real>> m_;
    std::vector<std::vector<Real>> v_;
    std::uint64_t step_ = 0;
};

// --- finite-difference checking -----------------------------------------

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Compares the analytic gradients already stored in `params[*].grad` with
/// central finite differences of `loss`. Relative error per entry is
/// |analytic - fd| / max(1, |analytic|).
template <typename LossFn>
GradCheckReport grad_check(LossFn&& loss, std::span<const ParamRef> params, double h);

}  // namespace tcwm

#include "tcwm/detail/grad_check_impl.hpp"
