#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cxrssl/augment.hpp"
#include "cxrssl/errors.hpp"
#include "cxrssl/nn/models.hpp"
#include "cxrssl/nn/optimizer.hpp"
#include "cxrssl/ssl/learner.hpp"

namespace cxrssl::config {

/// Which stages precede fine-tuning.
///   scratch      random init, no pre-training
///   transfer     external backbone weights, no SSL
///   transfer_ssl external weights, then SSL
///   ssl_only     random init, then SSL
enum class InitMode { scratch, transfer, transfer_ssl, ssl_only };

inline std::string to_string(InitMode m) {
    switch (m) {
    case InitMode::scratch: return "scratch";
    case InitMode::transfer: return "transfer";
    case InitMode::transfer_ssl: return "transfer_ssl";
    case InitMode::ssl_only: return "ssl_only";
    }
    return "?";
}

inline InitMode parse_init_mode(const std::string& s) {
    for (InitMode m : {InitMode::scratch, InitMode::transfer, InitMode::transfer_ssl, InitMode::ssl_only}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw UsageError("unknown init_mode '" + s + "' (expected scratch, transfer, transfer_ssl or ssl_only)");
}

inline bool uses_transfer(InitMode m) { return m == InitMode::transfer || m == InitMode::transfer_ssl; }
inline bool uses_ssl(InitMode m) { return m == InitMode::transfer_ssl || m == InitMode::ssl_only; }

struct TrainConfig {
    // Hyperparameter table defaults.
    std::size_t ssl_epochs = 40;
    std::size_t finetune_epochs = 30;
    std::size_t batch_size = 256;
    double learning_rate = 0.03;
    double momentum = 0.9;
    double weight_decay = 0.0004;
    double tau = 0.996;
    std::size_t mlp_hidden = 4096;
    std::size_t projection_size = 256;
    std::size_t view_size = 128;
    InitMode init_mode = InitMode::transfer_ssl;
    double label_fraction = 1.0;
    std::optional<std::uint64_t> seed;
    ssl::LossVariant loss_variant = ssl::LossVariant::paper;

    // Settings the hyperparameter table leaves open.
    double train_ratio = 0.8;
    std::size_t finetune_resolution = 128;
    std::size_t input_channels = 3;
    std::string backbone = "convnet";
    std::vector<std::size_t> backbone_widths{16, 32, 64, 128};
    std::string backbone_weights; ///< external backbone checkpoint for transfer modes
    double crop_scale_min = 0.2;
    double crop_scale_max = 1.0;
    double aspect_ratio_min = 3.0 / 4.0;
    double aspect_ratio_max = 4.0 / 3.0;
    double flip_probability = 0.5;
    double blur_probability = 0.5;
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 2.0;
    std::size_t eval_last_k = 10;

    bool operator==(const TrainConfig&) const = default;

    nn::BackboneSpec backbone_spec() const { return {backbone, input_channels, backbone_widths}; }

    ssl::SslArchitecture ssl_architecture() const { return {backbone_spec(), mlp_hidden, projection_size}; }

    nn::SgdSettings sgd() const { return {learning_rate, momentum, weight_decay}; }

    augment::AugmentationPolicy augmentation() const {
        augment::AugmentationPolicy p;
        p.crop_scale_range = {crop_scale_min, crop_scale_max};
        p.aspect_ratio_range = {aspect_ratio_min, aspect_ratio_max};
        p.flip_probability = flip_probability;
        p.blur_probability = blur_probability;
        p.blur_sigma_range = {blur_sigma_min, blur_sigma_max};
        p.view_size = view_size;
        return p;
    }

    std::uint64_t require_seed() const {
        if (!seed) {
            throw UsageError("no seed configured (set `seed` or pass --seed)");
        }
        return *seed;
    }

    void validate() const {
        auto positive = [](std::size_t v, const char* key) {
            if (v == 0) {
                throw UsageError(std::string(key) + " must be positive");
            }
        };
        positive(batch_size, "batch_size");
        positive(mlp_hidden, "mlp_hidden");
        positive(projection_size, "projection_size");
        positive(finetune_resolution, "finetune_resolution");
        positive(eval_last_k, "eval_last_k");
        if (!(tau >= 0.0 && tau <= 1.0)) {
            throw UsageError("tau must lie in [0, 1]");
        }
        if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
            throw UsageError("label_fraction must lie in (0, 1]");
        }
        if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
            throw UsageError("train_ratio must lie in (0, 1)");
        }
        if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0)) {
            throw UsageError("optimizer settings need learning_rate > 0, momentum in [0, 1), weight_decay >= 0");
        }
        if (input_channels != 1 && input_channels != 3) {
            throw UsageError("input_channels must be 1 or 3");
        }
        if (backbone_widths.empty()) {
            throw UsageError("backbone_widths must list at least one stage");
        }
        augmentation().validate();
        nn::make_backbone<float>(backbone_spec());
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
    V v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
    }
    return v;
}

inline std::vector<std::size_t> parse_widths(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) {
            throw UsageError("config key '" + key + "': empty list entry");
        }
        out.push_back(parse_number<std::size_t>(key, item.substr(b, e - b + 1)));
    }
    return out;
}

struct Field {
    const char* key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

#define CXRSSL_SIZE_FIELD(name)                                                                                    \
    Field{#name, [](const TrainConfig& c) { return std::to_string(c.name); },                                    \
          [](TrainConfig& c, const std::string& v) { c.name = parse_number<std::size_t>(#name, v); }}
#define CXRSSL_REAL_FIELD(name)                                                                                    \
    Field{#name, [](const TrainConfig& c) { return format_double(c.name); },                                     \
          [](TrainConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); }}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> table{
        CXRSSL_SIZE_FIELD(ssl_epochs),
        CXRSSL_SIZE_FIELD(finetune_epochs),
        CXRSSL_SIZE_FIELD(batch_size),
        CXRSSL_REAL_FIELD(learning_rate),
        CXRSSL_REAL_FIELD(momentum),
        CXRSSL_REAL_FIELD(weight_decay),
        CXRSSL_REAL_FIELD(tau),
        CXRSSL_SIZE_FIELD(mlp_hidden),
        CXRSSL_SIZE_FIELD(projection_size),
        CXRSSL_SIZE_FIELD(view_size),
        Field{"init_mode", [](const TrainConfig& c) { return to_string(c.init_mode); },
              [](TrainConfig& c, const std::string& v) { c.init_mode = parse_init_mode(v); }},
        CXRSSL_REAL_FIELD(label_fraction),
        Field{"seed", [](const TrainConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); },
              [](TrainConfig& c, const std::string& v) {
                  c.seed = v.empty() ? std::nullopt : std::optional(parse_number<std::uint64_t>("seed", v));
              }},
        Field{"loss_variant", [](const TrainConfig& c) { return ssl::to_string(c.loss_variant); },
              [](TrainConfig& c, const std::string& v) { c.loss_variant = ssl::parse_loss_variant(v); }},
        CXRSSL_REAL_FIELD(train_ratio),
        CXRSSL_SIZE_FIELD(finetune_resolution),
        CXRSSL_SIZE_FIELD(input_channels),
        Field{"backbone", [](const TrainConfig& c) { return c.backbone; },
              [](TrainConfig& c, const std::string& v) { c.backbone = v; }},
        Field{"backbone_widths",
              [](const TrainConfig& c) {
                  std::string s;
                  for (std::size_t i = 0; i < c.backbone_widths.size(); ++i) {
                      s += (i ? "," : "") + std::to_string(c.backbone_widths[i]);
                  }
                  return s;
              },
              [](TrainConfig& c, const std::string& v) { c.backbone_widths = parse_widths("backbone_widths", v); }},
        Field{"backbone_weights", [](const TrainConfig& c) { return c.backbone_weights; },
              [](TrainConfig& c, const std::string& v) { c.backbone_weights = v; }},
        CXRSSL_REAL_FIELD(crop_scale_min),
        CXRSSL_REAL_FIELD(crop_scale_max),
        CXRSSL_REAL_FIELD(aspect_ratio_min),
        CXRSSL_REAL_FIELD(aspect_ratio_max),
        CXRSSL_REAL_FIELD(flip_probability),
        CXRSSL_REAL_FIELD(blur_probability),
        CXRSSL_REAL_FIELD(blur_sigma_min),
        CXRSSL_REAL_FIELD(blur_sigma_max),
        CXRSSL_SIZE_FIELD(eval_last_k),
    };
    return table;
}

#undef CXRSSL_SIZE_FIELD
#undef CXRSSL_REAL_FIELD

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

} // namespace detail

/// Every key in declaration order, one `key = value` line each. Doubles use the
/// shortest text that parses back to the same value.
inline std::string to_text(const TrainConfig& cfg) {
    std::string out;
    for (const auto& f : detail::fields()) {
        out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    }
    return out;
}

struct ParsedConfig {
    TrainConfig config;
    std::set<std::string> explicit_keys;
};

/// Overlays `text` on `base`. `#` starts a comment; unknown or repeated keys are errors.
inline ParsedConfig parse_config(const std::string& text, TrainConfig base = {}) {
    ParsedConfig parsed{std::move(base), {}};
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected `key = value`");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto& table = detail::fields();
        const auto it = std::find_if(table.begin(), table.end(), [&](const detail::Field& f) { return key == f.key; });
        if (it == table.end()) {
            throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (!parsed.explicit_keys.insert(key).second) {
            throw UsageError("config line " + std::to_string(line_no) + ": key '" + key + "' given twice");
        }
        it->set(parsed.config, value);
    }
    return parsed;
}

inline ParsedConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace cxrssl::config
