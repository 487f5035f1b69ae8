#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "cxrssl/augment.hpp"
#include "cxrssl/data.hpp"
#include "cxrssl/image_io.hpp"
#include "cxrssl/nn/models.hpp"

namespace cxrssl::explain {

/// Attention map at input resolution, values in [0, 1].
struct Heatmap {
    Tensor<float> values; ///< (H, W)
    data::ClassLabel target_class = data::ClassLabel::covid;
    bool degenerate = false; ///< no gradient signal; values are all zero

    std::size_t height() const { return values.dim(0); }
    std::size_t width() const { return values.dim(1); }
};

/// Grad-CAM++ map from feature maps A (K, h, w) and the class-score gradient dA.
/// Returns the rectified, unnormalized (h, w) map. A zero denominator zeroes alpha.
template <typename T>
Tensor<double> gradcampp_from_maps(const Tensor<T>& maps, const Tensor<T>& grads) {
    if (maps.rank() != 3) {
        throw ShapeMismatch("feature maps must be (K, h, w), got " + to_string(maps.shape()));
    }
    require_shape(grads, maps.shape(), "feature-map gradient");
    const std::size_t k = maps.dim(0);
    const std::size_t hw = maps.dim(1) * maps.dim(2);
    Tensor<double> cam({maps.dim(1), maps.dim(2)});
    for (std::size_t c = 0; c < k; ++c) {
        const T* a = maps.data() + c * hw;
        const T* g = grads.data() + c * hw;
        double sum_a = 0;
        for (std::size_t i = 0; i < hw; ++i) {
            sum_a += static_cast<double>(a[i]);
        }
        double weight = 0;
        for (std::size_t i = 0; i < hw; ++i) {
            const double gi = static_cast<double>(g[i]);
            const double g2 = gi * gi;
            const double denom = 2.0 * g2 + sum_a * g2 * gi;
            const double alpha = denom != 0.0 ? g2 / denom : 0.0;
            weight += alpha * std::max(gi, 0.0);
        }
        for (std::size_t i = 0; i < hw; ++i) {
            cam[i] += weight * static_cast<double>(a[i]);
        }
    }
    for (auto& v : cam.values()) {
        v = std::max(v, 0.0);
    }
    return cam;
}

/// Upsamples a rectified map to (out_h, out_w) and min-max normalizes it.
/// Normalizing after upsampling keeps max = 1 exact. A constant positive map
/// becomes all ones; an all-zero map is flagged degenerate.
inline Heatmap finalize_heatmap(const Tensor<double>& cam, std::size_t out_h, std::size_t out_w,
                                data::ClassLabel target_class) {
    Heatmap hm;
    hm.target_class = target_class;
    const auto peak = std::max_element(cam.values().begin(), cam.values().end());
    if (peak == cam.values().end() || !(*peak > 0.0) || !std::isfinite(*peak)) {
        hm.values = Tensor<float>({out_h, out_w});
        hm.degenerate = true;
        return hm;
    }
    Tensor<float> small({1, cam.dim(0), cam.dim(1)});
    for (std::size_t i = 0; i < cam.size(); ++i) {
        small[i] = static_cast<float>(cam[i] / *peak);
    }
    Tensor<float> up = augment::resize_bilinear(small, out_h, out_w).reshaped({out_h, out_w});
    const auto [lo_it, hi_it] = std::minmax_element(up.values().begin(), up.values().end());
    const float lo = *lo_it;
    const float range = *hi_it - lo;
    for (auto& v : up.values()) {
        v = range > 0.0f ? std::clamp((v - lo) / range, 0.0f, 1.0f) : 1.0f;
    }
    hm.values = std::move(up);
    return hm;
}

/// Grad-CAM++ for one (C, H, W) input, targeting the last convolutional feature map.
template <typename T>
Heatmap gradcampp(const nn::ClassifierArch<T>& model, const ParameterSet<T>& params, const Tensor<T>& image,
                  data::ClassLabel target_class) {
    if (!model.spatial) {
        throw UsageError("Grad-CAM++ needs a backbone with convolutional feature maps");
    }
    if (image.rank() != 3) {
        throw ShapeMismatch("explain input must be (C, H, W), got " + to_string(image.shape()));
    }
    // Eval mode leaves parameters untouched.
    auto& p = const_cast<ParameterSet<T>&>(params);
    Tensor<T> x = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
    Tensor<T> fmap = model.seq->forward(p, x, nn::Mode::eval, nullptr, 0, model.feature_map_end);
    nn::Trace<T> head_trace;
    Tensor<T> logits = model.seq->forward(p, fmap, nn::Mode::eval, &head_trace, model.feature_map_end);
    Tensor<T> dy(logits.shape());
    dy[data::index_of(target_class)] = T(1);
    Tensor<T> dmap = model.seq->backward(params, head_trace, dy, nullptr);

    const Shape per_image{fmap.dim(1), fmap.dim(2), fmap.dim(3)};
    Tensor<double> cam = gradcampp_from_maps(fmap.reshaped(per_image), dmap.reshaped(per_image));
    bool any_gradient = false;
    for (const T g : dmap.values()) {
        any_gradient = any_gradient || g != T(0);
    }
    if (!any_gradient) {
        cam.fill(0.0);
    }
    return finalize_heatmap(cam, image.dim(1), image.dim(2), target_class);
}

/// (r, g, b) in [0, 1] for heatmap value v.
inline std::array<float, 3> colormap(const std::string& name, float v) {
    v = std::clamp(v, 0.0f, 1.0f);
    if (name == "jet") {
        const auto ramp = [](float x) { return std::clamp(1.5f - std::abs(x), 0.0f, 1.0f); };
        return {ramp(4.0f * v - 3.0f), ramp(4.0f * v - 2.0f), ramp(4.0f * v - 1.0f)};
    }
    if (name == "bluered") {
        return {v, 0.0f, 1.0f - v};
    }
    throw UsageError("unknown colormap '" + name + "' (expected jet or bluered)");
}

/// Alpha-blends the colored heatmap over the grayscale rendition of `image`.
inline Tensor<float> render_overlay(const Tensor<float>& image, const Heatmap& heatmap,
                                    const std::string& colormap_name = "jet", float alpha = 0.4f) {
    augment::require_image(image);
    const std::size_t h = image.dim(1);
    const std::size_t w = image.dim(2);
    if (heatmap.values.shape() != Shape{h, w}) {
        throw ShapeMismatch("heatmap " + to_string(heatmap.values.shape()) + " does not match image " +
                            to_string(image.shape()));
    }
    if (!(alpha >= 0.0f && alpha <= 1.0f)) {
        throw UsageError("overlay blend factor must lie in [0, 1]");
    }
    const std::size_t channels = image.dim(0);
    Tensor<float> out({3, h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        float gray = 0;
        for (std::size_t c = 0; c < channels; ++c) {
            gray += image[c * h * w + i];
        }
        gray /= static_cast<float>(channels);
        const auto rgb = colormap(colormap_name, heatmap.values[i]);
        for (std::size_t c = 0; c < 3; ++c) {
            out[c * h * w + i] = std::clamp((1.0f - alpha) * gray + alpha * rgb[c], 0.0f, 1.0f);
        }
    }
    return out;
}

inline void overlay(const std::filesystem::path& path, const Tensor<float>& image, const Heatmap& heatmap,
                    const std::string& colormap_name = "jet", float alpha = 0.4f) {
    io::write_png(path, render_overlay(image, heatmap, colormap_name, alpha));
}

/// `<name>_cam_<class>.png`
inline std::string overlay_filename(const std::filesystem::path& source, data::ClassLabel cls) {
    return source.stem().string() + "_cam_" + std::string(data::class_name(cls)) + ".png";
}

} // namespace cxrssl::explain
