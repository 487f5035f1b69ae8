#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cxrssl/parameter_set.hpp"
#include "cxrssl/random.hpp"
#include "cxrssl/tensor.hpp"

namespace cxrssl::nn {

/// train: batch statistics, running statistics updated. eval: running statistics, nothing mutated.
enum class Mode { train, eval };

template <typename T>
using Cache = std::vector<Tensor<T>>;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void accumulate_grad(ParameterSet<T>* grads, const std::string& name, const Tensor<T>& g) {
    if (grads == nullptr) {
        return;
    }
    if (!grads->contains(name)) {
        grads->add(name, g);
        return;
    }
    auto dst = grads->at(name).values();
    const auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
}

/// A stateless layer description. Parameters live in a ParameterSet under
/// `<name>.<blob>`; per-call activations needed for backprop go into a Cache.
template <typename T>
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const noexcept { return name_; }
    std::string blob(const char* suffix) const { return name_ + "." + suffix; }

    virtual std::string kind() const = 0;

    /// Adds freshly initialized parameters for this layer.
    virtual void initialize(ParameterSet<T>& /*params*/, Rng& /*rng*/) const {}

    /// Output shape for an input shape (excluding nothing: full shape with batch).
    virtual Shape output_shape(const Shape& input) const = 0;

    /// `cache` may be null when no backward pass follows.
    virtual Tensor<T> forward(ParameterSet<T>& params, const Tensor<T>& x, Mode mode, Cache<T>* cache) const = 0;

    /// Returns dL/dx; adds dL/dparams into `grads` unless it is null.
    virtual Tensor<T> backward(const ParameterSet<T>& params, const Cache<T>& cache, const Tensor<T>& dy,
                               ParameterSet<T>* grads) const = 0;

private:
    std::string name_;
};

/// 2-D convolution without bias, square kernel, zero padding.
template <typename T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
           std::size_t padding)
        : Layer<T>(std::move(name)), in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding) {}

    std::string kind() const override { return "conv2d"; }
    std::size_t in_channels() const noexcept { return in_; }
    std::size_t out_channels() const noexcept { return out_; }

    void initialize(ParameterSet<T>& params, Rng& rng) const override {
        // He-normal on fan-in.
        const double stddev = std::sqrt(2.0 / static_cast<double>(in_ * k_ * k_));
        Tensor<T> w({out_, in_, k_, k_});
        for (auto& v : w.values()) {
            v = normal<T>(rng, T{0}, static_cast<T>(stddev));
        }
        params.add(this->blob("weight"), std::move(w));
    }

    Shape output_shape(const Shape& input) const override {
        check_input(input);
        return {input[0], out_, out_extent(input[2]), out_extent(input[3])};
    }

    Tensor<T> forward(ParameterSet<T>& params, const Tensor<T>& x, Mode, Cache<T>* cache) const override {
        const Shape out_shape = output_shape(x.shape());
        const std::size_t n = x.dim(0);
        const std::size_t h = x.dim(2);
        const std::size_t w = x.dim(3);
        const std::size_t oh = out_shape[2];
        const std::size_t ow = out_shape[3];
        const std::size_t rows = in_ * k_ * k_;
        const std::size_t cols = oh * ow;
        const Tensor<T>& weight = params.at(this->blob("weight"));
        require_shape(weight, {out_, in_, k_, k_}, this->name());

        Tensor<T> col({n, rows, cols});
        Tensor<T> y(out_shape);
        Eigen::Map<const RowMatrix<T>> wm(weight.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(rows));
        for (std::size_t s = 0; s < n; ++s) {
            T* c = col.data() + s * rows * cols;
            im2col(x.data() + s * in_ * h * w, h, w, oh, ow, c);
            Eigen::Map<const RowMatrix<T>> cm(c, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            Eigen::Map<RowMatrix<T>> ym(y.data() + s * out_ * cols, static_cast<Eigen::Index>(out_),
                                       static_cast<Eigen::Index>(cols));
            ym.noalias() = wm * cm;
        }
        if (cache != nullptr) {
            cache->push_back(std::move(col));
            cache->push_back(Tensor<T>({4}, {T(n), T(in_), T(h), T(w)}));
        }
        return y;
    }

    Tensor<T> backward(const ParameterSet<T>& params, const Cache<T>& cache, const Tensor<T>& dy,
                       ParameterSet<T>* grads) const override {
        const Tensor<T>& col = cache.at(0);
        const auto& dims = cache.at(1);
        const auto n = static_cast<std::size_t>(dims[0]);
        const auto h = static_cast<std::size_t>(dims[2]);
        const auto w = static_cast<std::size_t>(dims[3]);
        const std::size_t oh = out_extent(h);
        const std::size_t ow = out_extent(w);
        const std::size_t rows = in_ * k_ * k_;
        const std::size_t cols = oh * ow;
        require_shape(dy, {n, out_, oh, ow}, this->name() + " backward");

        const Tensor<T>& weight = params.at(this->blob("weight"));
        Eigen::Map<const RowMatrix<T>> wm(weight.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(rows));
        Tensor<T> dw({out_, in_, k_, k_});
        Eigen::Map<RowMatrix<T>> dwm(dw.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(rows));
        Tensor<T> dx({n, in_, h, w});
        RowMatrix<T> dcol(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t s = 0; s < n; ++s) {
            Eigen::Map<const RowMatrix<T>> cm(col.data() + s * rows * cols, static_cast<Eigen::Index>(rows),
                                              static_cast<Eigen::Index>(cols));
            Eigen::Map<const RowMatrix<T>> dym(dy.data() + s * out_ * cols, static_cast<Eigen::Index>(out_),
                                               static_cast<Eigen::Index>(cols));
            if (grads != nullptr) {
                dwm.noalias() += dym * cm.transpose();
            }
            dcol.noalias() = wm.transpose() * dym;
            col2im(dcol.data(), h, w, oh, ow, dx.data() + s * in_ * h * w);
        }
        accumulate_grad(grads, this->blob("weight"), dw);
        return dx;
    }

private:
    void check_input(const Shape& input) const {
        if (input.size() != 4 || input[1] != in_) {
            throw ShapeMismatch(this->name() + ": expected (N, " + std::to_string(in_) + ", H, W) input, got " +
                                to_string(input));
        }
        if (input[2] + 2 * pad_ < k_ || input[3] + 2 * pad_ < k_) {
            throw ShapeMismatch(this->name() + ": input " + to_string(input) + " smaller than kernel");
        }
    }

    std::size_t out_extent(std::size_t extent) const { return (extent + 2 * pad_ - k_) / stride_ + 1; }

    void im2col(const T* img, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* col) const {
        std::size_t r = 0;
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ki = 0; ki < k_; ++ki) {
                for (std::size_t kj = 0; kj < k_; ++kj, ++r) {
                    T* dst = col + r * oh * ow;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ki) - static_cast<std::ptrdiff_t>(pad_);
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const auto ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kj) - static_cast<std::ptrdiff_t>(pad_);
                            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                                ix < static_cast<std::ptrdiff_t>(w);
                            dst[oy * ow + ox] = inside ? img[(c * h + static_cast<std::size_t>(iy)) * w +
                                                             static_cast<std::size_t>(ix)]
                                                       : T{0};
                        }
                    }
                }
            }
        }
    }

    void col2im(const T* col, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* img) const {
        std::size_t r = 0;
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ki = 0; ki < k_; ++ki) {
                for (std::size_t kj = 0; kj < k_; ++kj, ++r) {
                    const T* src = col + r * oh * ow;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ki) - static_cast<std::ptrdiff_t>(pad_);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            continue;
                        }
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const auto ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kj) - static_cast<std::ptrdiff_t>(pad_);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) {
                                continue;
                            }
                            img[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] +=
                                src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }

    std::size_t in_, out_, k_, stride_, pad_;
};

/// Batch normalization over (N, C) or (N, C, H, W) inputs, per channel.
template <typename T>
class BatchNorm final : public Layer<T> {
public:
    BatchNorm(std::string name, std::size_t channels, double momentum = 0.1, double eps = 1e-5)
        : Layer<T>(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps) {}

    std::string kind() const override { return "batchnorm"; }

    void initialize(ParameterSet<T>& params, Rng&) const override {
        params.add(this->blob("gamma"), Tensor<T>({channels_}, T{1}));
        params.add(this->blob("beta"), Tensor<T>({channels_}, T{0}));
        params.add(this->blob("running_mean"), Tensor<T>({channels_}, T{0}));
        params.add(this->blob("running_var"), Tensor<T>({channels_}, T{1}));
    }

    Shape output_shape(const Shape& input) const override {
        if ((input.size() != 2 && input.size() != 4) || input[1] != channels_) {
            throw ShapeMismatch(this->name() + ": expected (N, " + std::to_string(channels_) + "[, H, W]) input, got " +
                                to_string(input));
        }
        return input;
    }

    Tensor<T> forward(ParameterSet<T>& params, const Tensor<T>& x, Mode mode, Cache<T>* cache) const override {
        output_shape(x.shape());
        const std::size_t n = x.dim(0);
        const std::size_t spatial = x.size() / (n * channels_);
        const std::size_t count = n * spatial;
        const auto gamma = params.at(this->blob("gamma")).values();
        const auto beta = params.at(this->blob("beta")).values();
        auto running_mean = params.at(this->blob("running_mean")).values();
        auto running_var = params.at(this->blob("running_var")).values();

        Tensor<T> xhat(x.shape());
        Tensor<T> inv_std({channels_});
        Tensor<T> y(x.shape());
        for (std::size_t c = 0; c < channels_; ++c) {
            double mean = 0.0;
            double var = 0.0;
            if (mode == Mode::train) {
                for (std::size_t s = 0; s < n; ++s) {
                    const T* p = x.data() + (s * channels_ + c) * spatial;
                    for (std::size_t i = 0; i < spatial; ++i) {
                        mean += p[i];
                    }
                }
                mean /= static_cast<double>(count);
                for (std::size_t s = 0; s < n; ++s) {
                    const T* p = x.data() + (s * channels_ + c) * spatial;
                    for (std::size_t i = 0; i < spatial; ++i) {
                        const double d = p[i] - mean;
                        var += d * d;
                    }
                }
                var /= static_cast<double>(count);
                const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
                running_mean[c] = static_cast<T>((1.0 - momentum_) * running_mean[c] + momentum_ * mean);
                running_var[c] = static_cast<T>((1.0 - momentum_) * running_var[c] + momentum_ * unbiased);
            } else {
                mean = running_mean[c];
                var = running_var[c];
            }
            const double istd = 1.0 / std::sqrt(var + eps_);
            inv_std[c] = static_cast<T>(istd);
            for (std::size_t s = 0; s < n; ++s) {
                const std::size_t off = (s * channels_ + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    const T xh = static_cast<T>((x[off + i] - mean) * istd);
                    xhat[off + i] = xh;
                    y[off + i] = gamma[c] * xh + beta[c];
                }
            }
        }
        if (cache != nullptr) {
            cache->push_back(std::move(xhat));
            cache->push_back(std::move(inv_std));
            cache->push_back(Tensor<T>({1}, T(mode == Mode::train ? 1 : 0)));
        }
        return y;
    }

    Tensor<T> backward(const ParameterSet<T>& params, const Cache<T>& cache, const Tensor<T>& dy,
                       ParameterSet<T>* grads) const override {
        const Tensor<T>& xhat = cache.at(0);
        const Tensor<T>& inv_std = cache.at(1);
        const bool batch_stats = cache.at(2)[0] != T{0};
        require_shape(dy, xhat.shape(), this->name() + " backward");
        const std::size_t n = dy.dim(0);
        const std::size_t spatial = dy.size() / (n * channels_);
        const double count = static_cast<double>(n * spatial);
        const auto gamma = params.at(this->blob("gamma")).values();

        Tensor<T> dgamma({channels_});
        Tensor<T> dbeta({channels_});
        Tensor<T> dx(dy.shape());
        for (std::size_t c = 0; c < channels_; ++c) {
            double sum_dy = 0.0;
            double sum_dy_xhat = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const std::size_t off = (s * channels_ + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    sum_dy += dy[off + i];
                    sum_dy_xhat += static_cast<double>(dy[off + i]) * xhat[off + i];
                }
            }
            dgamma[c] = static_cast<T>(sum_dy_xhat);
            dbeta[c] = static_cast<T>(sum_dy);
            const double scale = static_cast<double>(gamma[c]) * inv_std[c];
            for (std::size_t s = 0; s < n; ++s) {
                const std::size_t off = (s * channels_ + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    if (batch_stats) {
                        dx[off + i] = static_cast<T>(scale / count *
                                                     (count * dy[off + i] - sum_dy - xhat[off + i] * sum_dy_xhat));
                    } else {
                        dx[off + i] = static_cast<T>(scale * dy[off + i]);
                    }
                }
            }
        }
        accumulate_grad(grads, this->blob("gamma"), dgamma);
        accumulate_grad(grads, this->blob("beta"), dbeta);
        return dx;
    }

private:
    std::size_t channels_;
    double momentum_;
    double eps_;
};

template <typename T>
class Relu final : public Layer<T> {
public:
    using Layer<T>::Layer;

    std::string kind() const override { return "relu"; }
    Shape output_shape(const Shape& input) const override { return input; }

    Tensor<T> forward(ParameterSet<T>&, const Tensor<T>& x, Mode, Cache<T>* cache) const override {
        Tensor<T> y = x;
        for (auto& v : y.values()) {
            v = v > T{0} ? v : T{0};
        }
        if (cache != nullptr) {
            cache->push_back(y);
        }
        return y;
    }

    Tensor<T> backward(const ParameterSet<T>&, const Cache<T>& cache, const Tensor<T>& dy,
                       ParameterSet<T>*) const override {
        const Tensor<T>& y = cache.at(0);
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (!(y[i] > T{0})) {
                dx[i] = T{0};
            }
        }
        return dx;
    }
};

/// y = x W^T + b on (N, in) inputs.
template <typename T>
class Linear final : public Layer<T> {
public:
    Linear(std::string name, std::size_t in_features, std::size_t out_features)
        : Layer<T>(std::move(name)), in_(in_features), out_(out_features) {}

    std::string kind() const override { return "linear"; }
    std::size_t in_features() const noexcept { return in_; }
    std::size_t out_features() const noexcept { return out_; }

    void initialize(ParameterSet<T>& params, Rng& rng) const override {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
        Tensor<T> w({out_, in_});
        for (auto& v : w.values()) {
            v = uniform<T>(rng, static_cast<T>(-bound), static_cast<T>(bound));
        }
        Tensor<T> b({out_});
        for (auto& v : b.values()) {
            v = uniform<T>(rng, static_cast<T>(-bound), static_cast<T>(bound));
        }
        params.add(this->blob("weight"), std::move(w));
        params.add(this->blob("bias"), std::move(b));
    }

    Shape output_shape(const Shape& input) const override {
        if (input.size() != 2 || input[1] != in_) {
            throw ShapeMismatch(this->name() + ": expected (N, " + std::to_string(in_) + ") input, got " +
                                to_string(input));
        }
        return {input[0], out_};
    }

    Tensor<T> forward(ParameterSet<T>& params, const Tensor<T>& x, Mode, Cache<T>* cache) const override {
        const Shape out_shape = output_shape(x.shape());
        const auto n = static_cast<Eigen::Index>(x.dim(0));
        const Tensor<T>& weight = params.at(this->blob("weight"));
        const Tensor<T>& bias = params.at(this->blob("bias"));
        require_shape(weight, {out_, in_}, this->name());
        Tensor<T> y(out_shape);
        Eigen::Map<const RowMatrix<T>> xm(x.data(), n, static_cast<Eigen::Index>(in_));
        Eigen::Map<const RowMatrix<T>> wm(weight.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(bias.data(), static_cast<Eigen::Index>(out_));
        Eigen::Map<RowMatrix<T>> ym(y.data(), n, static_cast<Eigen::Index>(out_));
        ym.noalias() = xm * wm.transpose();
        ym.rowwise() += bm;
        if (cache != nullptr) {
            cache->push_back(x);
        }
        return y;
    }

    Tensor<T> backward(const ParameterSet<T>& params, const Cache<T>& cache, const Tensor<T>& dy,
                       ParameterSet<T>* grads) const override {
        const Tensor<T>& x = cache.at(0);
        const auto n = static_cast<Eigen::Index>(x.dim(0));
        require_shape(dy, {x.dim(0), out_}, this->name() + " backward");
        const Tensor<T>& weight = params.at(this->blob("weight"));
        Eigen::Map<const RowMatrix<T>> xm(x.data(), n, static_cast<Eigen::Index>(in_));
        Eigen::Map<const RowMatrix<T>> wm(weight.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
        Eigen::Map<const RowMatrix<T>> dym(dy.data(), n, static_cast<Eigen::Index>(out_));
        if (grads != nullptr) {
            Tensor<T> dw({out_, in_});
            Eigen::Map<RowMatrix<T>> dwm(dw.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
            dwm.noalias() = dym.transpose() * xm;
            Tensor<T> db({out_});
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbm(db.data(), static_cast<Eigen::Index>(out_));
            dbm = dym.colwise().sum();
            accumulate_grad(grads, this->blob("weight"), dw);
            accumulate_grad(grads, this->blob("bias"), db);
        }
        Tensor<T> dx(x.shape());
        Eigen::Map<RowMatrix<T>> dxm(dx.data(), n, static_cast<Eigen::Index>(in_));
        dxm.noalias() = dym * wm;
        return dx;
    }

private:
    std::size_t in_, out_;
};

/// (N, C, H, W) -> (N, C) spatial mean.
template <typename T>
class GlobalAvgPool final : public Layer<T> {
public:
    using Layer<T>::Layer;

    std::string kind() const override { return "global_avg_pool"; }

    Shape output_shape(const Shape& input) const override {
        if (input.size() != 4) {
            throw ShapeMismatch(this->name() + ": expected (N, C, H, W) input, got " + to_string(input));
        }
        return {input[0], input[1]};
    }

    Tensor<T> forward(ParameterSet<T>&, const Tensor<T>& x, Mode, Cache<T>* cache) const override {
        const Shape out_shape = output_shape(x.shape());
        const std::size_t spatial = x.dim(2) * x.dim(3);
        Tensor<T> y(out_shape);
        for (std::size_t i = 0; i < y.size(); ++i) {
            double sum = 0.0;
            const T* p = x.data() + i * spatial;
            for (std::size_t j = 0; j < spatial; ++j) {
                sum += p[j];
            }
            y[i] = static_cast<T>(sum / static_cast<double>(spatial));
        }
        if (cache != nullptr) {
            cache->push_back(Tensor<T>({4}, {T(x.dim(0)), T(x.dim(1)), T(x.dim(2)), T(x.dim(3))}));
        }
        return y;
    }

    Tensor<T> backward(const ParameterSet<T>&, const Cache<T>& cache, const Tensor<T>& dy,
                       ParameterSet<T>*) const override {
        const auto& d = cache.at(0);
        Shape shape{static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2]),
                    static_cast<std::size_t>(d[3])};
        require_shape(dy, {shape[0], shape[1]}, this->name() + " backward");
        const std::size_t spatial = shape[2] * shape[3];
        Tensor<T> dx(shape);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            const T g = dy[i] / static_cast<T>(spatial);
            std::fill_n(dx.data() + i * spatial, spatial, g);
        }
        return dx;
    }
};

} // namespace cxrssl::nn
