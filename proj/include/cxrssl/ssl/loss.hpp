#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cxrssl/errors.hpp"
#include "cxrssl/tensor.hpp"

namespace cxrssl::ssl {

/// Loss of one training step; `total = l1 + l2`.
struct LossValue {
    double total = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

/// Which pairs of representations are aligned.
///
/// paper:          l1 = a(P1, P2),  l2 = a(P2, Y2')
/// byol_symmetric: l1 = a(P1, Y2'), l2 = a(P2, Y1')
/// where a(x, y) = 2 - 2 cos(x, y).
enum class LossVariant { paper, byol_symmetric };

inline std::string to_string(LossVariant v) { return v == LossVariant::paper ? "paper" : "byol_symmetric"; }

inline LossVariant parse_loss_variant(const std::string& s) {
    if (s == "paper") {
        return LossVariant::paper;
    }
    if (s == "byol_symmetric") {
        return LossVariant::byol_symmetric;
    }
    throw UsageError("unknown loss_variant '" + s + "' (expected paper or byol_symmetric)");
}

namespace detail {

template <typename T>
double squared_norm(std::span<const T> v) {
    double s = 0.0;
    for (T x : v) {
        s += static_cast<double>(x) * x;
    }
    return s;
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * b[i];
    }
    return s;
}

template <typename T>
void require_pair(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) {
        throw ShapeMismatch("alignment_loss: dimension mismatch " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
    }
}

} // namespace detail

/// v / ||v||_2. Zero vectors have no direction and are rejected.
template <typename T>
std::vector<T> l2_normalize(std::span<const T> v) {
    const double norm = std::sqrt(detail::squared_norm(v));
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw DegenerateInput("l2_normalize: vector has zero or non-finite norm");
    }
    std::vector<T> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<T>(v[i] / norm);
    }
    return out;
}

/// ||a/|a| - b/|b|||^2 = 2 - 2 cos(a, b), in [0, 4].
template <typename T>
double alignment_loss(std::span<const T> a, std::span<const T> b) {
    detail::require_pair(a, b);
    const double na = std::sqrt(detail::squared_norm(a));
    const double nb = std::sqrt(detail::squared_norm(b));
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw DegenerateInput("alignment_loss: zero-norm input");
    }
    const double cosine = std::clamp(detail::dot(a, b) / (na * nb), -1.0, 1.0);
    return 2.0 - 2.0 * cosine;
}

/// Loss and its gradient with respect to `a`:
///   d/da (2 - 2 cos) = -2 (b / (|a||b|) - cos * a / |a|^2)
template <typename T>
double alignment_loss_grad_a(std::span<const T> a, std::span<const T> b, std::span<T> grad_a) {
    detail::require_pair(a, b);
    const double na2 = detail::squared_norm(a);
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(detail::squared_norm(b));
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw DegenerateInput("alignment_loss: zero-norm input");
    }
    const double cosine = detail::dot(a, b) / (na * nb);
    for (std::size_t i = 0; i < a.size(); ++i) {
        grad_a[i] = static_cast<T>(-2.0 * (b[i] / (na * nb) - cosine * a[i] / na2));
    }
    return 2.0 - 2.0 * std::clamp(cosine, -1.0, 1.0);
}

/// Gradients of the batch-mean losses with respect to the online predictions.
template <typename T>
struct LossGradients {
    LossValue loss;
    Tensor<T> d_p1;
    Tensor<T> d_p2;
};

namespace detail {

template <typename T>
void require_batch(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.rank() != 2 || a.shape() != b.shape() || a.dim(0) == 0) {
        throw ShapeMismatch(std::string("ssl_loss: ") + what + " shapes " + cxrssl::to_string(a.shape()) + " and " +
                            cxrssl::to_string(b.shape()) + " differ or are not (B, D)");
    }
}

/// Mean over rows of a(x_i, y_i); accumulates d/dx (and d/dy when `dy` given) scaled by 1/B.
template <typename T>
double mean_alignment(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* dx, Tensor<T>* dy) {
    const std::size_t batch = x.dim(0);
    const std::size_t dim = x.dim(1);
    const double inv_b = 1.0 / static_cast<double>(batch);
    std::vector<T> g(dim);
    double sum = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const auto xi = x.row(i);
        const auto yi = y.row(i);
        sum += alignment_loss_grad_a<T>(xi, yi, g);
        if (dx != nullptr) {
            auto row = dx->row(i);
            for (std::size_t j = 0; j < dim; ++j) {
                row[j] += static_cast<T>(g[j] * inv_b);
            }
        }
        if (dy != nullptr) {
            alignment_loss_grad_a<T>(yi, xi, g);
            auto row = dy->row(i);
            for (std::size_t j = 0; j < dim; ++j) {
                row[j] += static_cast<T>(g[j] * inv_b);
            }
        }
    }
    return sum * inv_b;
}

} // namespace detail

/// Two-term alignment loss averaged over the batch; rows are batch elements.
///   l1 = mean_i a(P1_i, P2_i),  l2 = mean_i a(P2_i, Y2'_i)
template <typename T>
LossValue ssl_loss(const Tensor<T>& p1, const Tensor<T>& p2, const Tensor<T>& y2_target) {
    detail::require_batch(p1, p2, "P1/P2");
    detail::require_batch(p2, y2_target, "P2/Y2'");
    LossValue out;
    out.l1 = detail::mean_alignment<T>(p1, p2, nullptr, nullptr);
    out.l2 = detail::mean_alignment<T>(p2, y2_target, nullptr, nullptr);
    out.total = out.l1 + out.l2;
    return out;
}

/// Loss plus gradients w.r.t. P1 and P2. Target projections are constants.
/// For `byol_symmetric`, `y1_target` must hold Y1' (target projection of view 1).
template <typename T>
LossGradients<T> ssl_loss_with_grad(const Tensor<T>& p1, const Tensor<T>& p2, const Tensor<T>& y2_target,
                                    LossVariant variant = LossVariant::paper, const Tensor<T>* y1_target = nullptr) {
    detail::require_batch(p1, p2, "P1/P2");
    detail::require_batch(p2, y2_target, "P2/Y2'");
    LossGradients<T> out{{}, Tensor<T>(p1.shape()), Tensor<T>(p2.shape())};
    if (variant == LossVariant::paper) {
        out.loss.l1 = detail::mean_alignment<T>(p1, p2, &out.d_p1, &out.d_p2);
        out.loss.l2 = detail::mean_alignment<T>(p2, y2_target, &out.d_p2, nullptr);
    } else {
        if (y1_target == nullptr) {
            throw UsageError("byol_symmetric loss needs the target projection of view 1");
        }
        detail::require_batch(p1, *y1_target, "P1/Y1'");
        out.loss.l1 = detail::mean_alignment<T>(p1, y2_target, &out.d_p1, nullptr);
        out.loss.l2 = detail::mean_alignment<T>(p2, *y1_target, &out.d_p2, nullptr);
    }
    out.loss.total = out.loss.l1 + out.loss.l2;
    return out;
}

} // namespace cxrssl::ssl
