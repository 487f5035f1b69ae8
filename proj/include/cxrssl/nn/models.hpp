#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cxrssl/nn/network.hpp"

namespace cxrssl::nn {

/// Selects a backbone family and its size.
///
/// - `convnet`: stages of 3x3 stride-2 conv -> batch norm -> ReLU over
///   (N, input_channels, H, W) images; one stage per entry of `widths`.
///   The last stage output is the feature map used for class activation maps.
/// - `mlp`: Linear -> ReLU layers over (N, input_channels) vectors; used for
///   small analytic checks.
struct BackboneSpec {
    std::string family = "convnet";
    std::size_t input_channels = 3;
    std::vector<std::size_t> widths{16, 32, 64, 128};

    bool operator==(const BackboneSpec&) const = default;
};

template <typename T>
struct Backbone {
    std::vector<std::shared_ptr<const Layer<T>>> layers;
    std::size_t feature_dim = 0;
    bool spatial = false; ///< true when the output is a (N, C, H, W) feature map
};

template <typename T>
Backbone<T> make_backbone(const BackboneSpec& spec) {
    if (spec.widths.empty()) {
        throw UsageError("backbone needs at least one stage width");
    }
    if (spec.input_channels == 0) {
        throw UsageError("backbone input_channels must be positive");
    }
    Backbone<T> bb;
    std::size_t in = spec.input_channels;
    if (spec.family == "convnet") {
        for (std::size_t i = 0; i < spec.widths.size(); ++i) {
            const std::string stage = "backbone.stage" + std::to_string(i);
            bb.layers.push_back(std::make_shared<Conv2d<T>>(stage + ".conv", in, spec.widths[i], 3, 2, 1));
            bb.layers.push_back(std::make_shared<BatchNorm<T>>(stage + ".bn", spec.widths[i]));
            bb.layers.push_back(std::make_shared<Relu<T>>(stage + ".relu"));
            in = spec.widths[i];
        }
        bb.spatial = true;
    } else if (spec.family == "mlp") {
        for (std::size_t i = 0; i < spec.widths.size(); ++i) {
            const std::string stage = "backbone.fc" + std::to_string(i);
            bb.layers.push_back(std::make_shared<Linear<T>>(stage, in, spec.widths[i]));
            bb.layers.push_back(std::make_shared<Relu<T>>(stage + ".relu"));
            in = spec.widths[i];
        }
        bb.spatial = false;
    } else {
        throw UsageError("unknown backbone family '" + spec.family + "' (expected convnet or mlp)");
    }
    bb.feature_dim = in;
    return bb;
}

/// Linear -> BN -> ReLU -> Linear, the layout shared by projector and predictor.
template <typename T>
void append_mlp_head(Sequential<T>& seq, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out) {
    seq.append(std::make_shared<Linear<T>>(prefix + ".fc1", in, hidden));
    seq.append(std::make_shared<BatchNorm<T>>(prefix + ".bn1", hidden));
    seq.append(std::make_shared<Relu<T>>(prefix + ".relu1"));
    seq.append(std::make_shared<Linear<T>>(prefix + ".fc2", hidden, out));
}

/// Layers of the backbone followed by global pooling when spatial.
/// Returns the index one past the last backbone layer (the feature-map boundary).
template <typename T>
std::size_t append_backbone(Sequential<T>& seq, const BackboneSpec& spec, std::size_t& feature_dim) {
    Backbone<T> bb = make_backbone<T>(spec);
    for (auto& l : bb.layers) {
        seq.append(std::move(l));
    }
    const std::size_t boundary = seq.size();
    if (bb.spatial) {
        seq.append(std::make_shared<GlobalAvgPool<T>>("pool"));
    }
    feature_dim = bb.feature_dim;
    return boundary;
}

/// Encoder E: backbone -> pool -> projector MLP; output dimension = projection size.
template <typename T>
std::shared_ptr<const Sequential<T>> make_encoder(const BackboneSpec& spec, std::size_t mlp_hidden,
                                                  std::size_t projection_size) {
    auto seq = std::make_shared<Sequential<T>>();
    std::size_t feat = 0;
    append_backbone(*seq, spec, feat);
    append_mlp_head(*seq, "projector", feat, mlp_hidden, projection_size);
    return seq;
}

/// Predictor G: projection -> projection through a hidden layer.
template <typename T>
std::shared_ptr<const Sequential<T>> make_predictor(std::size_t mlp_hidden, std::size_t projection_size) {
    auto seq = std::make_shared<Sequential<T>>();
    append_mlp_head(*seq, "predictor", projection_size, mlp_hidden, projection_size);
    return seq;
}

/// Classifier: backbone -> pool -> linear head producing logits.
template <typename T>
struct ClassifierArch {
    std::shared_ptr<const Sequential<T>> seq;
    std::size_t feature_map_end = 0; ///< layers [0, feature_map_end) produce the last feature map
    bool spatial = false;
};

template <typename T>
ClassifierArch<T> make_classifier(const BackboneSpec& spec, std::size_t num_classes) {
    auto seq = std::make_shared<Sequential<T>>();
    std::size_t feat = 0;
    const std::size_t boundary = append_backbone(*seq, spec, feat);
    seq->append(std::make_shared<Linear<T>>("head", feat, num_classes));
    return {seq, boundary, make_backbone<T>(spec).spatial};
}

/// Freshly initialized backbone blobs (names prefixed `backbone.`).
template <typename T>
ParameterSet<T> init_backbone_params(const BackboneSpec& spec, Rng& rng) {
    Sequential<T> seq;
    for (auto& l : make_backbone<T>(spec).layers) {
        seq.append(std::move(l));
    }
    return seq.initialize(rng);
}

/// Throws naming the first missing or mis-shaped blob when `supplied`
/// does not provide every blob of `expected`. Extra blobs are an error too.
template <typename T>
void check_blobs_match(const ParameterSet<T>& expected, const ParameterSet<T>& supplied, const std::string& what) {
    for (const auto& [name, blob] : expected) {
        if (!supplied.contains(name)) {
            throw ShapeMismatch(what + ": missing blob '" + name + "'");
        }
        if (supplied.at(name).shape() != blob.shape()) {
            throw ShapeMismatch(what + ": blob '" + name + "' has shape " + to_string(supplied.at(name).shape()) +
                                ", architecture expects " + to_string(blob.shape()));
        }
    }
    for (const auto& [name, blob] : supplied) {
        if (!expected.contains(name)) {
            throw ShapeMismatch(what + ": unexpected blob '" + name + "' for the declared architecture");
        }
    }
}

} // namespace cxrssl::nn
