#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "cxrssl/nn/layers.hpp"

namespace cxrssl::nn {

/// Activations recorded by one forward call over layers [begin, begin + caches.size()).
template <typename T>
struct Trace {
    std::size_t begin = 0;
    std::vector<Cache<T>> caches;
};

/// Ordered chain of layers. Immutable once built; parameters live outside.
template <typename T>
class Sequential {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    Sequential() = default;
    explicit Sequential(std::vector<std::shared_ptr<const Layer<T>>> layers) : layers_(std::move(layers)) {}

    void append(std::shared_ptr<const Layer<T>> layer) { layers_.push_back(std::move(layer)); }

    std::size_t size() const noexcept { return layers_.size(); }
    const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

    ParameterSet<T> initialize(Rng& rng) const {
        ParameterSet<T> params;
        for (const auto& l : layers_) {
            l->initialize(params, rng);
        }
        return params;
    }

    Shape output_shape(Shape shape, std::size_t begin = 0, std::size_t end = npos) const {
        end = std::min(end, layers_.size());
        for (std::size_t i = begin; i < end; ++i) {
            shape = layers_[i]->output_shape(shape);
        }
        return shape;
    }

    /// Runs layers [begin, end). With a trace, records what backward needs.
    Tensor<T> forward(ParameterSet<T>& params, Tensor<T> x, Mode mode, Trace<T>* trace = nullptr, std::size_t begin = 0,
                      std::size_t end = npos) const {
        end = std::min(end, layers_.size());
        if (trace != nullptr) {
            trace->begin = begin;
            trace->caches.clear();
            trace->caches.reserve(end - begin);
        }
        for (std::size_t i = begin; i < end; ++i) {
            Cache<T>* cache = nullptr;
            if (trace != nullptr) {
                cache = &trace->caches.emplace_back();
            }
            x = layers_[i]->forward(params, x, mode, cache);
        }
        return x;
    }

    Tensor<T> backward(const ParameterSet<T>& params, const Trace<T>& trace, Tensor<T> dy, ParameterSet<T>* grads) const {
        for (std::size_t j = trace.caches.size(); j-- > 0;) {
            dy = layers_.at(trace.begin + j)->backward(params, trace.caches[j], dy, grads);
        }
        return dy;
    }

private:
    std::vector<std::shared_ptr<const Layer<T>>> layers_;
};

/// Architecture plus its parameter values.
template <typename T>
struct Network {
    std::shared_ptr<const Sequential<T>> arch;
    ParameterSet<T> params;

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Trace<T>* trace = nullptr) {
        return arch->forward(params, x, mode, trace);
    }
    Tensor<T> backward(const Trace<T>& trace, const Tensor<T>& dy, ParameterSet<T>* grads) const {
        return arch->backward(params, trace, dy, grads);
    }
};

} // namespace cxrssl::nn
