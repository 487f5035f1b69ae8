#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>

#include "cxrssl/data.hpp"
#include "cxrssl/image_io.hpp"
#include "cxrssl/random.hpp"

// Synthetic stand-ins for radiographs, used by tests, the acceptance suite and
// `cxrssl synth`. Every image has a smooth random background plus noise.
//   localized_texture: the class is a small windowed texture patch at a random
//     position (horizontal stripes, vertical stripes, diagonal stripes, checks).
//   global_orientation: an unrelated task whose class is the orientation of a
//     faint full-frame grating (0, 45, 90, 135 degrees). Used to produce
//     "external" backbone weights without touching the target task's images.

namespace cxrssl::synthetic {

enum class Task { localized_texture, global_orientation };

struct Settings {
    std::size_t size = 128;
    double texture_amplitude = 0.18;
    double noise_sigma = 0.06;
    std::size_t patch_size = 32;
    double period = 6.0;
};

namespace detail {

inline void add_background(Tensor<float>& img, Rng& rng) {
    const std::size_t s = img.dim(1);
    const double fs = static_cast<double>(s);
    const double base = uniform(rng, 0.35, 0.55);
    const double tilt = uniform(rng, -0.1, 0.1);
    struct Blob {
        double cy, cx, r, a;
    };
    std::vector<Blob> blobs;
    for (int i = 0; i < 3; ++i) {
        blobs.push_back({uniform(rng, 0.0, fs), uniform(rng, 0.0, fs), uniform(rng, 0.15, 0.35) * fs,
                         uniform(rng, -0.15, 0.15)});
    }
    for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
            double v = base + tilt * (static_cast<double>(y) / fs - 0.5);
            for (const auto& b : blobs) {
                const double dy = static_cast<double>(y) - b.cy;
                const double dx = static_cast<double>(x) - b.cx;
                v += b.a * std::exp(-(dy * dy + dx * dx) / (2.0 * b.r * b.r));
            }
            img[y * s + x] = static_cast<float>(v);
        }
    }
}

inline double texture(data::ClassLabel cls, double y, double x, double period, double phase) {
    const double k = 2.0 * std::numbers::pi / period;
    switch (cls) {
    case data::ClassLabel::covid: return std::sin(k * y + phase);
    case data::ClassLabel::lung_opacity: return std::sin(k * x + phase);
    case data::ClassLabel::normal: return std::sin(k * (x + y) / std::numbers::sqrt2 + phase);
    case data::ClassLabel::viral_pneumonia: return std::sin(k * y + phase) * std::sin(k * x + phase);
    }
    return 0.0;
}

} // namespace detail

/// One (1, size, size) image in [0, 1] for `cls`, fully determined by `seed`.
inline Tensor<float> render(Task task, data::ClassLabel cls, std::uint64_t seed, const Settings& st = {}) {
    if (st.size < st.patch_size || st.patch_size == 0) {
        throw UsageError("synthetic image size must be at least the patch size");
    }
    Rng rng(seed);
    Tensor<float> img({1, st.size, st.size});
    detail::add_background(img, rng);
    const std::size_t s = st.size;
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    if (task == Task::localized_texture) {
        const std::size_t p = st.patch_size;
        const double top = std::floor(uniform(rng, 0.0, static_cast<double>(s - p + 1)));
        const double left = std::floor(uniform(rng, 0.0, static_cast<double>(s - p + 1)));
        for (std::size_t y = 0; y < p; ++y) {
            for (std::size_t x = 0; x < p; ++x) {
                // Hann window keeps the patch border invisible.
                const double wy = std::sin(std::numbers::pi * (static_cast<double>(y) + 0.5) / static_cast<double>(p));
                const double wx = std::sin(std::numbers::pi * (static_cast<double>(x) + 0.5) / static_cast<double>(p));
                const double t = detail::texture(cls, static_cast<double>(y), static_cast<double>(x), st.period, phase);
                const std::size_t at = (static_cast<std::size_t>(top) + y) * s + static_cast<std::size_t>(left) + x;
                img[at] += static_cast<float>(st.texture_amplitude * wy * wy * wx * wx * t);
            }
        }
    } else {
        const double angle = static_cast<double>(data::index_of(cls)) * std::numbers::pi / 4.0;
        const double period = uniform(rng, 0.8, 1.6) * st.period;
        const double k = 2.0 * std::numbers::pi / period;
        for (std::size_t y = 0; y < s; ++y) {
            for (std::size_t x = 0; x < s; ++x) {
                const double u = std::cos(angle) * static_cast<double>(x) + std::sin(angle) * static_cast<double>(y);
                img[y * s + x] += static_cast<float>(0.5 * st.texture_amplitude * std::sin(k * u + phase));
            }
        }
    }
    for (auto& v : img.values()) {
        v = std::clamp(v + static_cast<float>(normal(rng, 0.0, st.noise_sigma)), 0.0f, 1.0f);
    }
    return img;
}

/// Writes `per_class` PNGs per class under `<root>/<ClassName>/`.
inline void write_dataset(const std::filesystem::path& root, Task task, std::size_t per_class, std::uint64_t seed,
                          const Settings& st = {}) {
    for (data::ClassLabel cls : data::kAllClasses) {
        const auto dir = root / data::class_name(cls);
        std::filesystem::create_directories(dir);
        for (std::size_t i = 0; i < per_class; ++i) {
            const auto img = render(task, cls, derive_seed(seed, "synthetic", {data::index_of(cls), i}), st);
            char name[32];
            std::snprintf(name, sizeof name, "img_%05zu.png", i);
            io::write_png(dir / name, img);
        }
    }
}

} // namespace cxrssl::synthetic
