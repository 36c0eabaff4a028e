#include "tcwm/nn.hpp"

#include <algorithm>
#include <cmath>

#include "tcwm/errors.hpp"
#include "tcwm/kernels.hpp"

namespace tcwm {

AffineLayer::AffineLayer(std::size_t in, std::size_t out)
    : weight(Tensor::matrix(out, in)),
      bias(Tensor({out})),
      grad_weight(Tensor::matrix(out, in)),
      grad_bias(Tensor({out})) {}

AffineLayer AffineLayer::random(std::size_t in, std::size_t out, Rng& rng, double gain) {
    AffineLayer layer(in, out);
    const double scale = gain / std::sqrt(static_cast<double>(std::max<std::size_t>(in, 1)));
    for (auto& w : layer.weight.values()) w = static_cast<Real>(scale * rng.normal());
    return layer;
}

Tensor AffineLayer::forward(const Tensor& x) const {
    if (x.rank() == 0 || x.cols() != in_dim()) {
        throw DimensionError("affine_apply: input " + shape_string(x.shape()) + " incompatible with weight " +
                             shape_string(weight.shape()));
    }
    Shape out_shape = x.shape();
    out_shape.back() = out_dim();
    Tensor y(out_shape);
    kernels::affine_forward(weight.data(), bias.data(), x.data(), y.data(), {x.rows(), in_dim(), out_dim()});
    return y;
}

Tensor AffineLayer::backward_input(const Tensor& upstream) const {
    Shape in_shape = upstream.shape();
    in_shape.back() = in_dim();
    Tensor dx(in_shape);
    kernels::affine_backward_input(weight.data(), upstream.data(), dx.data(), {upstream.rows(), in_dim(), out_dim()});
    return dx;
}

Tensor AffineLayer::backward(const Tensor& x, const Tensor& upstream) {
    if (upstream.cols() != out_dim() || x.cols() != in_dim() || x.rows() != upstream.rows()) {
        throw DimensionError("affine backward: input " + shape_string(x.shape()) + ", upstream " +
                             shape_string(upstream.shape()) + ", weight " + shape_string(weight.shape()));
    }
    if (!upstream.all_finite()) throw NumericError("affine backward: non-finite upstream gradient");
    kernels::affine_backward_params(x.data(), upstream.data(), grad_weight.data(), grad_bias.data(),
                                    {x.rows(), in_dim(), out_dim()});
    return backward_input(upstream);
}

void AffineLayer::zero_grad() {
    grad_weight.fill(0);
    grad_bias.fill(0);
}

std::vector<ParamRef> AffineLayer::params(const std::string& prefix) {
    return {{prefix + ".weight", weight.values(), grad_weight.values()},
            {prefix + ".bias", bias.values(), grad_bias.values()}};
}

Tensor affine_apply(const AffineLayer& layer, const Tensor& x) { return layer.forward(x); }

MlpNet::MlpNet(std::vector<AffineLayer> l) : layers(std::move(l)) {
    for (std::size_t i = 1; i < layers.size(); ++i) {
        if (layers[i].in_dim() != layers[i - 1].out_dim()) {
            throw DimensionError("mlp: layer " + std::to_string(i) + " expects " +
                                 std::to_string(layers[i].in_dim()) + " inputs but previous layer emits " +
                                 std::to_string(layers[i - 1].out_dim()));
        }
    }
}

MlpNet MlpNet::random(const std::vector<std::size_t>& widths, Rng& rng, double gain) {
    if (widths.size() < 2) throw DimensionError("mlp: need at least input and output widths");
    std::vector<AffineLayer> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers.push_back(AffineLayer::random(widths[i], widths[i + 1], rng, gain));
    }
    return MlpNet(std::move(layers));
}

std::size_t MlpNet::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
std::size_t MlpNet::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

Tensor MlpNet::forward(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(h);
        if (i + 1 < layers.size()) kernels::tanh_forward(h.data(), h.data(), h.size());
    }
    return h;
}

Tensor MlpNet::forward(const Tensor& x, Cache& cache) const {
    cache.activations.clear();
    cache.activations.reserve(layers.size() + 1);
    cache.activations.push_back(x);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Tensor h = layers[i].forward(cache.activations.back());
        if (i + 1 < layers.size()) kernels::tanh_forward(h.data(), h.data(), h.size());
        cache.activations.push_back(std::move(h));
    }
    return cache.activations.back();
}

Tensor MlpNet::backward(const Cache& cache, const Tensor& upstream) {
    if (cache.activations.size() != layers.size() + 1) throw DimensionError("mlp backward: stale cache");
    if (upstream.shape() != cache.activations.back().shape()) {
        throw DimensionError("mlp backward: upstream " + shape_string(upstream.shape()) + " vs output " +
                             shape_string(cache.activations.back().shape()));
    }
    Tensor grad = upstream;
    for (std::size_t k = layers.size(); k-- > 0;) {
        if (k + 1 < layers.size()) {
            // Output of layer k went through tanh; its post-activation is cached.
            const Tensor& y = cache.activations[k + 1];
            kernels::tanh_backward(y.data(), grad.data(), grad.data(), grad.size());
        }
        grad = layers[k].backward(cache.activations[k], grad);
    }
    return grad;
}

void MlpNet::zero_grad() {
    for (auto& l : layers) l.zero_grad();
}

std::vector<ParamRef> MlpNet::params(const std::string& prefix) {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto p = layers[i].params(prefix + "." + std::to_string(i));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

Backprop backprop(MlpNet& net, const Tensor& x, const Tensor& upstream) {
    net.zero_grad();
    MlpNet::Cache cache;
    net.forward(x, cache);
    Backprop result;
    result.input_grad = net.backward(cache, upstream);
    for (const auto& l : net.layers) {
        result.weight_grads.push_back(l.grad_weight);
        result.bias_grads.push_back(l.grad_bias);
    }
    return result;
}

Adam::Adam(std::vector<ParamRef> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
        if (p.value.size() != p.grad.size()) throw DimensionError("adam: gradient buffer mismatch for " + p.name);
        m_.emplace_back(p.value.size(), Real(0));
        v_.emplace_back(p.value.size(), Real(0));
    }
}

void Adam::step() {
    bool any_nonzero = false;
    for (const auto& p : params_) {
        for (Real g : p.grad) {
            if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in " + p.name);
            any_nonzero = any_nonzero || g != Real(0);
        }
    }
    ++step_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            const double mi = b1 * m[i] + (1.0 - b1) * g;
            const double vi = b2 * v[i] + (1.0 - b2) * g * g;
            m[i] = static_cast<Real>(mi);
            v[i] = static_cast<Real>(vi);
            if (any_nonzero) {
                const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
                p.value[i] = static_cast<Real>(p.value[i] - update);
            }
        }
    }
}

}  // namespace tcwm
