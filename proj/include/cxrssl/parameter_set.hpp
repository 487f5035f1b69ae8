#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cxrssl/errors.hpp"
#include "cxrssl/tensor.hpp"

namespace cxrssl {

/// Named dense blobs (weights, biases, normalization statistics) ordered by name.
///
/// Naming convention: `<module>.<layer>.<blob>` where blob is one of
/// `weight`, `bias`, `gamma`, `beta`, `running_mean`, `running_var`.
/// Running statistics are buffers: they are serialized and averaged but
/// never receive gradients.
template <typename T>
class ParameterSet {
public:
    using map_type = std::map<std::string, Tensor<T>, std::less<>>;

    void add(std::string name, Tensor<T> blob) {
        auto [it, inserted] = blobs_.emplace(std::move(name), std::move(blob));
        if (!inserted) {
            throw UsageError("duplicate parameter blob '" + it->first + "'");
        }
    }

    /// Inserts or overwrites.
    void set(std::string name, Tensor<T> blob) { blobs_.insert_or_assign(std::move(name), std::move(blob)); }

    bool contains(std::string_view name) const { return blobs_.find(name) != blobs_.end(); }

    Tensor<T>& at(std::string_view name) {
        auto it = blobs_.find(name);
        if (it == blobs_.end()) {
            throw DataError("missing parameter blob '" + std::string(name) + "'");
        }
        return it->second;
    }
    const Tensor<T>& at(std::string_view name) const {
        auto it = blobs_.find(name);
        if (it == blobs_.end()) {
            throw DataError("missing parameter blob '" + std::string(name) + "'");
        }
        return it->second;
    }

    std::size_t size() const noexcept { return blobs_.size(); }
    bool empty() const noexcept { return blobs_.empty(); }
    auto begin() noexcept { return blobs_.begin(); }
    auto end() noexcept { return blobs_.end(); }
    auto begin() const noexcept { return blobs_.begin(); }
    auto end() const noexcept { return blobs_.end(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(blobs_.size());
        for (const auto& [name, blob] : blobs_) {
            out.push_back(name);
        }
        return out;
    }

    std::size_t element_count() const {
        std::size_t n = 0;
        for (const auto& [name, blob] : blobs_) {
            n += blob.size();
        }
        return n;
    }

    /// Blobs whose name starts with `prefix`; with `strip` the prefix is removed.
    ParameterSet subset(std::string_view prefix, bool strip = false) const {
        ParameterSet out;
        for (const auto& [name, blob] : blobs_) {
            if (name.starts_with(prefix)) {
                out.add(strip ? name.substr(prefix.size()) : name, blob);
            }
        }
        return out;
    }

    /// Copy with every name prefixed.
    ParameterSet prefixed(std::string_view prefix) const {
        ParameterSet out;
        for (const auto& [name, blob] : blobs_) {
            out.add(std::string(prefix) + name, blob);
        }
        return out;
    }

    /// Copies all blobs of `other` into this set, replacing same-named ones.
    void merge(const ParameterSet& other) {
        for (const auto& [name, blob] : other) {
            set(name, blob);
        }
    }

    ParameterSet zeros_like() const {
        ParameterSet out;
        for (const auto& [name, blob] : blobs_) {
            out.add(name, Tensor<T>(blob.shape()));
        }
        return out;
    }

    bool all_finite() const {
        for (const auto& [name, blob] : blobs_) {
            if (!cxrssl::all_finite(blob)) {
                return false;
            }
        }
        return true;
    }

    template <typename U>
    ParameterSet<U> cast() const {
        ParameterSet<U> out;
        for (const auto& [name, blob] : blobs_) {
            out.add(name, blob.template cast<U>());
        }
        return out;
    }

    bool operator==(const ParameterSet& other) const = default;

private:
    map_type blobs_;
};

/// Throws unless both sets have the same names and per-name shapes.
template <typename T, typename U>
void require_same_layout(const ParameterSet<T>& a, const ParameterSet<U>& b, const std::string& what) {
    for (const auto& [name, blob] : a) {
        if (!b.contains(name)) {
            throw ShapeMismatch(what + ": blob '" + name + "' missing from second set");
        }
        if (b.at(name).shape() != blob.shape()) {
            throw ShapeMismatch(what + ": blob '" + name + "' has shape " + to_string(blob.shape()) + " vs " +
                                to_string(b.at(name).shape()));
        }
    }
    for (const auto& [name, blob] : b) {
        if (!a.contains(name)) {
            throw ShapeMismatch(what + ": blob '" + name + "' missing from first set");
        }
    }
}

inline bool is_normalization_blob(std::string_view name) {
    return name.ends_with(".gamma") || name.ends_with(".beta");
}

inline bool is_buffer_blob(std::string_view name) {
    return name.ends_with(".running_mean") || name.ends_with(".running_var");
}

inline bool is_trainable_blob(std::string_view name) { return !is_buffer_blob(name); }

/// Weight decay covers every trainable blob except normalization scales/offsets.
inline bool applies_weight_decay(std::string_view name) {
    return is_trainable_blob(name) && !is_normalization_blob(name);
}

/// In-place exponential moving average: target <- tau * target + (1 - tau) * online.
/// Applies to every blob, normalization statistics included.
template <typename T>
void ema_update_in_place(ParameterSet<T>& target, const ParameterSet<T>& online, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw UsageError("moving-average degree tau must lie in [0, 1], got " + std::to_string(tau));
    }
    require_same_layout(target, online, "ema_update");
    if (tau == 1.0) {
        return;
    }
    const T keep = static_cast<T>(tau);
    const T take = static_cast<T>(1.0 - tau);
    for (auto& [name, blob] : target) {
        const auto src = online.at(name).values();
        auto dst = blob.values();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            T mixed = tau == 0.0 ? src[i] : keep * dst[i] + take * src[i];
            // Rounding can push the mix a hair outside [min, max]; clamp to keep it convex.
            const T lo = std::min(dst[i], src[i]);
            const T hi = std::max(dst[i], src[i]);
            dst[i] = std::clamp(mixed, lo, hi);
        }
    }
}

template <typename T>
ParameterSet<T> ema_update(const ParameterSet<T>& target, const ParameterSet<T>& online, double tau) {
    ParameterSet<T> out = target;
    ema_update_in_place(out, online, tau);
    return out;
}

} // namespace cxrssl
