#pragma once

#include "cxrssl/parameter_set.hpp"

namespace cxrssl::nn {

struct SgdSettings {
    double learning_rate = 0.03;
    double momentum = 0.9;
    double weight_decay = 0.0004;
};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
///   d = g + wd * theta;  v <- mu * v + d;  theta <- theta - lr * v
template <typename T>
class SgdMomentum {
public:
    SgdMomentum() = default;
    explicit SgdMomentum(SgdSettings settings) : settings_(settings) {}

    const SgdSettings& settings() const noexcept { return settings_; }

    /// Momentum buffers keyed by parameter name; zero-initialized on first use.
    ParameterSet<T>& velocity() noexcept { return velocity_; }
    const ParameterSet<T>& velocity() const noexcept { return velocity_; }

    /// Updates every blob of `params` that has a gradient in `grads`.
    void step(ParameterSet<T>& params, const ParameterSet<T>& grads) {
        const T lr = static_cast<T>(settings_.learning_rate);
        const T mu = static_cast<T>(settings_.momentum);
        const T wd = static_cast<T>(settings_.weight_decay);
        for (const auto& [name, grad] : grads) {
            if (!is_trainable_blob(name)) {
                continue;
            }
            Tensor<T>& theta = params.at(name);
            require_shape(grad, theta.shape(), "gradient for '" + name + "'");
            if (!velocity_.contains(name)) {
                velocity_.add(name, Tensor<T>(theta.shape()));
            }
            auto v = velocity_.at(name).values();
            auto p = theta.values();
            const auto g = grad.values();
            const bool decay = applies_weight_decay(name);
            for (std::size_t i = 0; i < p.size(); ++i) {
                const T d = decay ? g[i] + wd * p[i] : g[i];
                v[i] = mu * v[i] + d;
                p[i] -= lr * v[i];
            }
        }
    }

private:
    SgdSettings settings_;
    ParameterSet<T> velocity_;
};

} // namespace cxrssl::nn
