#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "cxrssl/nn/models.hpp"
#include "cxrssl/nn/optimizer.hpp"
#include "cxrssl/parameter_set.hpp"
#include "cxrssl/random.hpp"
#include "cxrssl/ssl/loss.hpp"

namespace cxrssl::ssl {

struct SslArchitecture {
    nn::BackboneSpec backbone;
    std::size_t mlp_hidden = 4096;
    std::size_t projection_size = 256;
};

/// Gradient-trained side: encoder (backbone + projector) and predictor.
template <typename T>
struct OnlineBranch {
    nn::Network<T> encoder;
    nn::Network<T> predictor;
};

/// Moving-average side: an encoder with the online encoder's layout. Never
/// receives gradients.
template <typename T>
struct TargetBranch {
    nn::Network<T> encoder;
};

/// Two augmented renditions of the same images, each (B, C, S, S) or (B, D).
template <typename T>
struct ViewBatch {
    Tensor<T> v1;
    Tensor<T> v2;
};

template <typename T>
struct ViewOutputs {
    Tensor<T> p1;        ///< G(E1(V1))
    Tensor<T> p2;        ///< G(E1(V2))
    Tensor<T> y2;        ///< E1(V2)
    Tensor<T> y2_target; ///< E2(V2), treated as a constant
};

namespace detail {

/// Eval mode reads parameters only, so running it on a const set is safe.
template <typename T>
Tensor<T> infer(const nn::Network<T>& net, const Tensor<T>& x) {
    auto& params = const_cast<ParameterSet<T>&>(net.params);
    return net.arch->forward(params, x, nn::Mode::eval);
}

template <typename T>
void require_views(const ViewBatch<T>& views) {
    if (views.v1.shape() != views.v2.shape() || views.v1.rank() < 2 || views.v1.dim(0) == 0) {
        throw ShapeMismatch("view pair shapes " + cxrssl::to_string(views.v1.shape()) + " and " + cxrssl::to_string(views.v2.shape()) +
                            " differ or hold no samples");
    }
}

} // namespace detail

/// Builds both branches. The online backbone takes `backbone_weights` when given
/// (transfer initialization) and is randomly initialized otherwise; projector and
/// predictor are always fresh; the target encoder starts as an exact copy.
template <typename T>
std::pair<OnlineBranch<T>, TargetBranch<T>> init_from_transfer(const SslArchitecture& arch,
                                                                const std::optional<ParameterSet<T>>& backbone_weights,
                                                                std::uint64_t seed) {
    OnlineBranch<T> online;
    online.encoder.arch = nn::make_encoder<T>(arch.backbone, arch.mlp_hidden, arch.projection_size);
    Rng enc_rng = make_rng(seed, "encoder-init");
    online.encoder.params = online.encoder.arch->initialize(enc_rng);
    if (backbone_weights) {
        nn::check_blobs_match(online.encoder.params.subset("backbone."), *backbone_weights, "backbone weights");
        online.encoder.params.merge(*backbone_weights);
    }
    online.predictor.arch = nn::make_predictor<T>(arch.mlp_hidden, arch.projection_size);
    Rng pred_rng = make_rng(seed, "predictor-init");
    online.predictor.params = online.predictor.arch->initialize(pred_rng);

    TargetBranch<T> target{online.encoder};
    return {std::move(online), std::move(target)};
}

/// Y1 = E1(V1), Y2 = E1(V2), Y2' = E2(V2), P1 = G(Y1), P2 = G(Y2).
/// Online layers run in `online_mode`; the target always uses running statistics.
template <typename T>
ViewOutputs<T> forward_views(OnlineBranch<T>& online, const TargetBranch<T>& target, const ViewBatch<T>& views,
                             nn::Mode online_mode = nn::Mode::train) {
    detail::require_views(views);
    ViewOutputs<T> out;
    const Tensor<T> y1 = online.encoder.forward(views.v1, online_mode);
    out.y2 = online.encoder.forward(views.v2, online_mode);
    out.p1 = online.predictor.forward(y1, online_mode);
    out.p2 = online.predictor.forward(out.y2, online_mode);
    out.y2_target = detail::infer(target.encoder, views.v2);
    return out;
}

/// Gradients of the step loss. `target` is all zeros with the target layout:
/// target projections enter the loss as constants.
template <typename T>
struct SslGradients {
    LossValue loss;
    ParameterSet<T> encoder;
    ParameterSet<T> predictor;
    ParameterSet<T> target;
};

template <typename T>
SslGradients<T> compute_ssl_gradients(OnlineBranch<T>& online, const TargetBranch<T>& target,
                                      const ViewBatch<T>& views, LossVariant variant = LossVariant::paper) {
    detail::require_views(views);
    nn::Trace<T> enc1, enc2, pred1, pred2;
    const Tensor<T> y1 = online.encoder.forward(views.v1, nn::Mode::train, &enc1);
    const Tensor<T> y2 = online.encoder.forward(views.v2, nn::Mode::train, &enc2);
    const Tensor<T> p1 = online.predictor.forward(y1, nn::Mode::train, &pred1);
    const Tensor<T> p2 = online.predictor.forward(y2, nn::Mode::train, &pred2);
    const Tensor<T> y2_target = detail::infer(target.encoder, views.v2);
    std::optional<Tensor<T>> y1_target;
    if (variant == LossVariant::byol_symmetric) {
        y1_target = detail::infer(target.encoder, views.v1);
    }

    const LossGradients<T> lg =
        ssl_loss_with_grad(p1, p2, y2_target, variant, y1_target ? &*y1_target : nullptr);

    SslGradients<T> out;
    out.loss = lg.loss;
    out.encoder = online.encoder.params.zeros_like();
    out.predictor = online.predictor.params.zeros_like();
    out.target = target.encoder.params.zeros_like();
    const Tensor<T> dy1 = online.predictor.backward(pred1, lg.d_p1, &out.predictor);
    const Tensor<T> dy2 = online.predictor.backward(pred2, lg.d_p2, &out.predictor);
    online.encoder.backward(enc1, dy1, &out.encoder);
    online.encoder.backward(enc2, dy2, &out.encoder);
    return out;
}

struct SslStepSettings {
    nn::SgdSettings sgd;
    double tau = 0.996;
    LossVariant variant = LossVariant::paper;
};

/// One optimization step: SGD-with-momentum on the online parameters, then the
/// target encoder moves toward the updated online encoder by
/// target <- tau * target + (1 - tau) * online. Returns the pre-update loss.
/// Nothing is modified when the loss or any gradient is non-finite.
template <typename T>
LossValue ssl_step(OnlineBranch<T>& online, TargetBranch<T>& target, const ViewBatch<T>& views,
                   nn::SgdMomentum<T>& optimizer, const SslStepSettings& settings) {
    if (!(settings.tau >= 0.0 && settings.tau <= 1.0)) {
        throw UsageError("tau must lie in [0, 1]");
    }
    // Running statistics are updated by the training forward pass; keep a copy
    // so a rejected step leaves the online branch untouched.
    const ParameterSet<T> encoder_before = online.encoder.params;
    const ParameterSet<T> predictor_before = online.predictor.params;
    const SslGradients<T> grads = compute_ssl_gradients(online, target, views, settings.variant);
    if (!std::isfinite(grads.loss.total) || !grads.encoder.all_finite() || !grads.predictor.all_finite()) {
        online.encoder.params = encoder_before;
        online.predictor.params = predictor_before;
        throw NumericalError("non-finite loss or gradient (loss=" + std::to_string(grads.loss.total) + ")");
    }
    optimizer.step(online.encoder.params, grads.encoder);
    optimizer.step(online.predictor.params, grads.predictor);
    ema_update_in_place(target.encoder.params, online.encoder.params, settings.tau);
    return grads.loss;
}

} // namespace cxrssl::ssl
