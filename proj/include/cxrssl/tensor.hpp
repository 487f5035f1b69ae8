#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cxrssl/errors.hpp"

namespace cxrssl {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) {
            os << ", ";
        }
        os << shape[i];
    }
    os << ')';
    return os.str();
}

/// Dense row-major array. Images are (C, H, W), batches (N, ...).
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != element_count(shape_)) {
            throw ShapeMismatch("tensor of shape " + to_string(shape_) + " cannot hold " +
                                std::to_string(data_.size()) + " values");
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// Element access for (N, F) matrices.
    T& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    /// Contiguous slice along the leading axis.
    std::span<T> row(std::size_t i) {
        const std::size_t stride = data_.size() / shape_.at(0);
        return std::span<T>(data_).subspan(i * stride, stride);
    }
    std::span<const T> row(std::size_t i) const {
        const std::size_t stride = data_.size() / shape_.at(0);
        return std::span<const T>(data_).subspan(i * stride, stride);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    Tensor reshaped(Shape shape) const {
        if (element_count(shape) != data_.size()) {
            throw ShapeMismatch("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
        }
        return Tensor(std::move(shape), data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
    return std::all_of(t.values().begin(), t.values().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected, const std::string& what) {
    if (t.shape() != expected) {
        throw ShapeMismatch(what + ": expected shape " + to_string(expected) + ", got " + to_string(t.shape()));
    }
}

/// Stacks equally shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
    if (items.empty()) {
        throw ShapeMismatch("cannot stack an empty list");
    }
    Shape shape = items.front().shape();
    std::vector<T> out;
    out.reserve(items.size() * items.front().size());
    for (const auto& item : items) {
        require_shape(item, shape, "stack");
        out.insert(out.end(), item.values().begin(), item.values().end());
    }
    shape.insert(shape.begin(), items.size());
    return Tensor<T>(std::move(shape), std::move(out));
}

} // namespace cxrssl
