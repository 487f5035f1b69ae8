#include <gtest/gtest.h>

#include <cmath>

#include "cxrssl/explain.hpp"
#include "test_util.hpp"

namespace cxrssl::explain {
namespace {

using data::ClassLabel;

struct SmallModel {
    nn::ClassifierArch<float> arch;
    ParameterSet<float> params;
};

SmallModel small_model(std::uint64_t seed) {
    nn::BackboneSpec spec;
    spec.input_channels = 1;
    spec.widths = {4, 4};
    SmallModel m{nn::make_classifier<float>(spec, data::kNumClasses), {}};
    Rng rng(seed);
    m.params = m.arch.seq->initialize(rng);
    return m;
}

Tensor<float> random_image(std::size_t side, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<float> img({1, side, side});
    for (auto& v : img.values()) {
        v = uniform<float>(rng, 0.0f, 1.0f);
    }
    return img;
}

TEST(GradCamPlusPlus, HandDerivedTwoByTwo) {
    // One channel, single active cell, unit gradient everywhere:
    // alpha = 1 / (2 + sum(A)) = 1/3 per cell, weight = 4 * 1/3, cam = (4/3) * A.
    Tensor<double> a({1, 2, 2}, {1, 0, 0, 0});
    Tensor<double> g({1, 2, 2}, {1, 1, 1, 1});
    const Tensor<double> cam = gradcampp_from_maps(a, g);
    EXPECT_NEAR(cam[0], 4.0 / 3.0, 1e-12);
    EXPECT_EQ(cam[1], 0.0);
    EXPECT_EQ(cam[2], 0.0);
    EXPECT_EQ(cam[3], 0.0);

    const Heatmap hm = finalize_heatmap(cam, 8, 8, ClassLabel::covid);
    EXPECT_FALSE(hm.degenerate);
    const auto peak = std::max_element(hm.values.values().begin(), hm.values.values().end());
    const std::size_t at = static_cast<std::size_t>(peak - hm.values.values().begin());
    EXPECT_LT(at / 8, 4u); // top-left quadrant
    EXPECT_LT(at % 8, 4u);
    EXPECT_FLOAT_EQ(hm.values.at(0, 0), 1.0f);
    EXPECT_FLOAT_EQ(hm.values.at(7, 7), 0.0f);
}

TEST(GradCamPlusPlus, NegativeGradientsContributeNothing) {
    Tensor<double> a({1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> g({1, 2, 2}, {-1, -1, -1, -1});
    const Tensor<double> cam = gradcampp_from_maps(a, g);
    for (double v : cam.values()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(GradCamPlusPlus, ConstantMapsGiveConstantHeatmap) {
    Tensor<double> a({3, 4, 4});
    a.fill(2.0);
    Tensor<double> g({3, 4, 4});
    g.fill(0.5);
    const Heatmap hm = finalize_heatmap(gradcampp_from_maps(a, g), 16, 16, ClassLabel::normal);
    EXPECT_FALSE(hm.degenerate);
    for (float v : hm.values.values()) {
        EXPECT_EQ(v, hm.values[0]);
    }
}

TEST(GradCamPlusPlus, ZeroGradientIsDegenerate) {
    Tensor<double> a({2, 3, 3});
    a.fill(1.0);
    Tensor<double> g({2, 3, 3});
    const Heatmap hm = finalize_heatmap(gradcampp_from_maps(a, g), 12, 12, ClassLabel::covid);
    EXPECT_TRUE(hm.degenerate);
    for (float v : hm.values.values()) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(GradCamPlusPlus, ZeroedHeadGivesDegenerateHeatmap) {
    SmallModel m = small_model(3);
    m.params.at("head.weight").fill(0.0f);
    const Heatmap hm = gradcampp(m.arch, m.params, random_image(32, 1), ClassLabel::covid);
    EXPECT_TRUE(hm.degenerate);
    EXPECT_EQ(hm.values.shape(), (Shape{32, 32}));
}

TEST(GradCamPlusPlus, ShapeBoundsAndNormalization) {
    SmallModel m = small_model(5);
    for (std::size_t c = 0; c < data::kNumClasses; ++c) {
        const Heatmap hm = gradcampp(m.arch, m.params, random_image(128, 7), data::class_from_index(c));
        ASSERT_EQ(hm.values.shape(), (Shape{128, 128}));
        if (hm.degenerate) {
            continue;
        }
        const auto [lo, hi] = std::minmax_element(hm.values.values().begin(), hm.values.values().end());
        EXPECT_EQ(*lo, 0.0f);
        EXPECT_EQ(*hi, 1.0f);
    }
}

TEST(GradCamPlusPlus, Deterministic) {
    SmallModel m = small_model(9);
    const auto img = random_image(48, 2);
    const Heatmap a = gradcampp(m.arch, m.params, img, ClassLabel::lung_opacity);
    const Heatmap b = gradcampp(m.arch, m.params, img, ClassLabel::lung_opacity);
    EXPECT_EQ(a.values, b.values);
}

TEST(GradCamPlusPlus, ClassSpecificEvidenceGivesDifferentMaps) {
    // Class c reads only feature channel c, so each class looks at different evidence.
    SmallModel m = small_model(11);
    Tensor<float>& w = m.params.at("head.weight");
    w.fill(0.0f);
    for (std::size_t c = 0; c < data::kNumClasses; ++c) {
        w.at(c, c) = 1.0f;
    }
    const auto img = random_image(32, 4);
    const Heatmap a = gradcampp(m.arch, m.params, img, ClassLabel::covid);
    const Heatmap b = gradcampp(m.arch, m.params, img, ClassLabel::normal);
    double l1 = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        l1 += std::abs(a.values[i] - b.values[i]);
    }
    EXPECT_GT(l1, 0.0);
}

TEST(GradCamPlusPlus, RejectsNonSpatialModel) {
    nn::BackboneSpec spec;
    spec.family = "mlp";
    spec.input_channels = 4;
    spec.widths = {8};
    const auto arch = nn::make_classifier<float>(spec, 4);
    Rng rng(1);
    const auto params = arch.seq->initialize(rng);
    EXPECT_THROW(gradcampp(arch, params, Tensor<float>({4, 1, 1}), ClassLabel::covid), UsageError);
}

TEST(Colormap, EndpointsAndMidpoint) {
    const auto lo = colormap("jet", 0.0f);
    const auto hi = colormap("jet", 1.0f);
    EXPECT_GT(lo[2], lo[0]); // blue end
    EXPECT_GT(hi[0], hi[2]); // red end
    const auto mid = colormap("jet", 0.5f);
    EXPECT_FLOAT_EQ(mid[0], mid[2]); // symmetric midpoint
    EXPECT_FLOAT_EQ(mid[1], 1.0f);
    EXPECT_EQ(colormap("bluered", 0.5f), (std::array<float, 3>{0.5f, 0.0f, 0.5f}));
    EXPECT_THROW(colormap("viridis", 0.1f), UsageError);
}

TEST(Overlay, ZeroAndOneHeatmapsGiveUniformTint) {
    Tensor<float> img({1, 4, 4});
    img.fill(0.5f);
    for (float level : {0.0f, 1.0f}) {
        Heatmap hm{Tensor<float>({4, 4}), ClassLabel::covid, false};
        hm.values.fill(level);
        const auto out = render_overlay(img, hm, "jet", 0.4f);
        const auto tint = colormap("jet", level);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < 16; ++i) {
                EXPECT_NEAR(out[c * 16 + i], 0.6f * 0.5f + 0.4f * tint[c], 1e-6);
            }
        }
    }
}

TEST(Overlay, WritesPngAndChecksSizes) {
    testing::TempDir dir;
    Tensor<float> img({3, 6, 5});
    Heatmap hm{Tensor<float>({6, 5}), ClassLabel::covid, false};
    const auto path = dir.path() / overlay_filename("scan01.png", ClassLabel::viral_pneumonia);
    EXPECT_EQ(path.filename(), "scan01_cam_ViralPneumonia.png");
    overlay(path, img, hm);
    const auto info = io::read_png_info(path);
    EXPECT_EQ(info.width, 5u);
    EXPECT_EQ(info.height, 6u);
    Heatmap wrong{Tensor<float>({5, 5}), ClassLabel::covid, false};
    EXPECT_THROW(render_overlay(img, wrong), ShapeMismatch);
    EXPECT_THROW(render_overlay(img, hm, "jet", 1.5f), UsageError);
}

} // namespace
} // namespace cxrssl::explain
