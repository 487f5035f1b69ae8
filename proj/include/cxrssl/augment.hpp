#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cxrssl/errors.hpp"
#include "cxrssl/random.hpp"
#include "cxrssl/tensor.hpp"

namespace cxrssl::augment {

/// (C, H, W) float image in [0, 1].
using Image = Tensor<float>;

/// Smallest side (pixels) an input may have before pre-scaling.
inline constexpr std::size_t kMinCroppableSide = 8;

/// The view-generation distribution: random resized crop, horizontal flip,
/// Gaussian blur. Both views of a pair are drawn from the same policy.
struct AugmentationPolicy {
    std::pair<double, double> crop_scale_range{0.2, 1.0};
    std::pair<double, double> aspect_ratio_range{3.0 / 4.0, 4.0 / 3.0};
    double flip_probability = 0.5;
    double blur_probability = 0.5;
    std::pair<double, double> blur_sigma_range{0.1, 2.0};
    std::size_t view_size = 128;

    void validate() const {
        auto ordered = [](const std::pair<double, double>& r) { return r.first <= r.second; };
        if (!ordered(crop_scale_range) || crop_scale_range.first <= 0.0 || crop_scale_range.second > 1.0) {
            throw UsageError("crop_scale_range must satisfy 0 < low <= high <= 1");
        }
        if (!ordered(aspect_ratio_range) || aspect_ratio_range.first <= 0.0) {
            throw UsageError("aspect_ratio_range must satisfy 0 < low <= high");
        }
        if (flip_probability < 0.0 || flip_probability > 1.0 || blur_probability < 0.0 || blur_probability > 1.0) {
            throw UsageError("augmentation probabilities must lie in [0, 1]");
        }
        if (!ordered(blur_sigma_range) || blur_sigma_range.first <= 0.0) {
            throw UsageError("blur_sigma_range must satisfy 0 < low <= high");
        }
        if (view_size == 0) {
            throw UsageError("view_size must be positive");
        }
    }
};

struct CropBox {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// One draw t ~ T, independent of pixel content.
struct TransformDraw {
    CropBox crop;
    double area_fraction = 1.0;
    bool flip = false;
    std::optional<double> blur_sigma;
};

inline void require_image(const Image& image) {
    if (image.rank() != 3 || image.dim(0) == 0 || image.dim(1) == 0 || image.dim(2) == 0) {
        throw ShapeMismatch("expected a non-empty (C, H, W) image, got " + to_string(image.shape()));
    }
}

/// Bilinear resampling with half-pixel centers (no corner alignment).
inline Image resize_bilinear(const Image& image, std::size_t out_h, std::size_t out_w) {
    require_image(image);
    const std::size_t c = image.dim(0);
    const std::size_t h = image.dim(1);
    const std::size_t w = image.dim(2);
    if (out_h == h && out_w == w) {
        return image;
    }
    Image out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t k = 0; k < c; ++k) {
                const float* p = image.data() + k * h * w;
                const double top = p[y0 * w + x0] * (1.0 - wx) + p[y0 * w + x1] * wx;
                const double bottom = p[y1 * w + x0] * (1.0 - wx) + p[y1 * w + x1] * wx;
                out[(k * out_h + y) * out_w + x] = static_cast<float>(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    return out;
}

inline Image crop(const Image& image, const CropBox& box) {
    require_image(image);
    const std::size_t c = image.dim(0);
    const std::size_t h = image.dim(1);
    const std::size_t w = image.dim(2);
    if (box.height == 0 || box.width == 0 || box.top + box.height > h || box.left + box.width > w) {
        throw ShapeMismatch("crop box outside the image");
    }
    Image out({c, box.height, box.width});
    for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t y = 0; y < box.height; ++y) {
            const float* src = image.data() + (k * h + box.top + y) * w + box.left;
            std::copy_n(src, box.width, out.data() + (k * box.height + y) * box.width);
        }
    }
    return out;
}

inline Image flip_horizontal(const Image& image) {
    require_image(image);
    Image out = image;
    const std::size_t w = image.dim(2);
    const std::size_t rows = image.dim(0) * image.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
        std::reverse(out.data() + r * w, out.data() + (r + 1) * w);
    }
    return out;
}

/// Normalized 1-D Gaussian taps, radius round(4 sigma). A radius of zero
/// (sigma < 0.125) yields the single tap {1}: the identity.
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw DegenerateInput("gaussian_blur: sigma must be positive, got " + std::to_string(sigma));
    }
    const auto radius = static_cast<std::size_t>(std::lround(4.0 * sigma));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(radius);
        taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += taps[i];
    }
    for (double& t : taps) {
        t /= sum;
    }
    return taps;
}

/// Separable Gaussian blur with edge replication; output clipped to [0, 1].
inline Image gaussian_blur(const Image& image, double sigma) {
    require_image(image);
    const std::vector<double> taps = gaussian_kernel(sigma);
    if (taps.size() == 1) {
        return image;
    }
    const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const std::size_t c = image.dim(0);
    const auto h = static_cast<std::ptrdiff_t>(image.dim(1));
    const auto w = static_cast<std::ptrdiff_t>(image.dim(2));
    Image tmp(image.shape());
    Image out(image.shape());
    for (std::size_t k = 0; k < c; ++k) {
        const float* src = image.data() + k * static_cast<std::size_t>(h * w);
        float* mid = tmp.data() + k * static_cast<std::size_t>(h * w);
        float* dst = out.data() + k * static_cast<std::size_t>(h * w);
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                    const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + t, 0, w - 1);
                    acc += taps[static_cast<std::size_t>(t + radius)] * src[y * w + xx];
                }
                mid[y * w + x] = static_cast<float>(acc);
            }
        }
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
                    const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + t, 0, h - 1);
                    acc += taps[static_cast<std::size_t>(t + radius)] * mid[yy * w + x];
                }
                dst[y * w + x] = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
            }
        }
    }
    return out;
}

/// Draws crop box, flip and blur for an image of size h x w.
/// Crop sampling follows the usual random-resized-crop scheme: up to ten
/// tries of (area fraction, log-uniform aspect ratio); the whole image otherwise.
inline TransformDraw sample_transform(const AugmentationPolicy& policy, std::size_t h, std::size_t w, Rng& rng) {
    TransformDraw draw;
    const double area = static_cast<double>(h) * static_cast<double>(w);
    const double log_lo = std::log(policy.aspect_ratio_range.first);
    const double log_hi = std::log(policy.aspect_ratio_range.second);
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
        const double scale = uniform(rng, policy.crop_scale_range.first, policy.crop_scale_range.second);
        const double ratio = std::exp(uniform(rng, log_lo, log_hi));
        const auto cw = static_cast<std::size_t>(std::lround(std::sqrt(area * scale * ratio)));
        const auto ch = static_cast<std::size_t>(std::lround(std::sqrt(area * scale / ratio)));
        if (cw > 0 && ch > 0 && cw <= w && ch <= h) {
            draw.crop.height = ch;
            draw.crop.width = cw;
            draw.crop.top = static_cast<std::size_t>(rng() % (h - ch + 1));
            draw.crop.left = static_cast<std::size_t>(rng() % (w - cw + 1));
            found = true;
        }
    }
    if (!found) {
        draw.crop = CropBox{0, 0, h, w};
    }
    draw.area_fraction = static_cast<double>(draw.crop.height * draw.crop.width) / area;
    draw.flip = uniform(rng, 0.0, 1.0) < policy.flip_probability;
    if (uniform(rng, 0.0, 1.0) < policy.blur_probability) {
        draw.blur_sigma = uniform(rng, policy.blur_sigma_range.first, policy.blur_sigma_range.second);
    }
    return draw;
}

inline Image apply_transform(const Image& image, const TransformDraw& draw, std::size_t view_size) {
    Image out = resize_bilinear(crop(image, draw.crop), view_size, view_size);
    if (draw.flip) {
        out = flip_horizontal(out);
    }
    if (draw.blur_sigma) {
        out = gaussian_blur(out, *draw.blur_sigma);
    }
    return out;
}

/// Two augmented views of one image, each (C, view_size, view_size).
struct ViewPair {
    Image v1;
    Image v2;
};

/// Upscales images whose shorter side is below `view_size` so that side equals it.
inline Image prescale(const Image& image, std::size_t view_size) {
    require_image(image);
    const std::size_t h = image.dim(1);
    const std::size_t w = image.dim(2);
    if (std::min(h, w) < kMinCroppableSide) {
        throw DataError("image of " + std::to_string(h) + "x" + std::to_string(w) +
                        " pixels is below the minimum croppable side of " + std::to_string(kMinCroppableSide));
    }
    if (std::min(h, w) >= view_size) {
        return image;
    }
    const double f = static_cast<double>(view_size) / static_cast<double>(std::min(h, w));
    return resize_bilinear(image, std::max(view_size, static_cast<std::size_t>(std::lround(h * f))),
                           std::max(view_size, static_cast<std::size_t>(std::lround(w * f))));
}

/// Applies two independent draws t1, t2 ~ T to the same image. Each draw uses
/// its own stream derived from `seed`, so the result depends only on
/// (image, policy, seed).
inline ViewPair make_view_pair(const Image& image, const AugmentationPolicy& policy, std::uint64_t seed) {
    policy.validate();
    const Image base = prescale(image, policy.view_size);
    const std::size_t h = base.dim(1);
    const std::size_t w = base.dim(2);
    Rng rng1 = make_rng(seed, "view", {1});
    Rng rng2 = make_rng(seed, "view", {2});
    const TransformDraw t1 = sample_transform(policy, h, w, rng1);
    const TransformDraw t2 = sample_transform(policy, h, w, rng2);
    return {apply_transform(base, t1, policy.view_size), apply_transform(base, t2, policy.view_size)};
}

} // namespace cxrssl::augment
