#include "fpd/layers.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Core>

namespace fpd::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// cols is (C*k*k) x (H*W): row (c,u,v) holds the input shifted by (u-p, v-p).
template <typename T>
void im2col(const T* in, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, T* cols) {
    const auto p = static_cast<std::ptrdiff_t>(k / 2);
    const auto H = static_cast<std::ptrdiff_t>(h);
    const auto W = static_cast<std::ptrdiff_t>(w);
    T* dst = cols;
    for (std::size_t c = 0; c < channels; ++c) {
        const T* plane = in + c * h * w;
        for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(k); ++u) {
            for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(k); ++v) {
                const std::ptrdiff_t dx = v - p;
                const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(W, W - dx);
                for (std::ptrdiff_t y = 0; y < H; ++y, dst += w) {
                    const std::ptrdiff_t sy = y + u - p;
                    if (sy < 0 || sy >= H || x_lo >= x_hi) {
                        std::fill(dst, dst + w, T(0));
                        continue;
                    }
                    std::fill(dst, dst + x_lo, T(0));
                    std::copy(plane + sy * W + x_lo + dx, plane + sy * W + x_hi + dx, dst + x_lo);
                    std::fill(dst + x_hi, dst + w, T(0));
                }
            }
        }
    }
}

// Adjoint of im2col: scatters every column entry back onto its input pixel.
template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, T* in) {
    const auto p = static_cast<std::ptrdiff_t>(k / 2);
    const auto H = static_cast<std::ptrdiff_t>(h);
    const auto W = static_cast<std::ptrdiff_t>(w);
    std::fill(in, in + channels * h * w, T(0));
    const T* src = cols;
    for (std::size_t c = 0; c < channels; ++c) {
        T* plane = in + c * h * w;
        for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(k); ++u) {
            for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(k); ++v) {
                const std::ptrdiff_t dx = v - p;
                const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t x_hi = std::min<std::ptrdiff_t>(W, W - dx);
                for (std::ptrdiff_t y = 0; y < H; ++y, src += w) {
                    const std::ptrdiff_t sy = y + u - p;
                    if (sy < 0 || sy >= H) continue;
                    T* row = plane + sy * W + dx;
                    for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) row[x] += src[x];
                }
            }
        }
    }
}

template <typename T>
void check_conv(const Tensor4<T>& input, const ConvParams<T>& params) {
    if (input.channels() != params.in_channels) {
        throw ShapeError("conv2d: input " + input.shape().str() + " has " + std::to_string(input.channels()) +
                         " channels, filters " + std::to_string(params.out_channels) + "x" +
                         std::to_string(params.in_channels) + "x" + std::to_string(params.kernel) + "x" +
                         std::to_string(params.kernel) + " expect " + std::to_string(params.in_channels));
    }
    if (params.weights.size() != params.out_channels * params.fan_in() || params.bias.size() != params.out_channels) {
        throw ShapeError("conv2d: parameter buffers do not match the declared filter shape");
    }
}

}  // namespace

template <typename T>
ConvParams<T> ConvParams<T>::zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kernel) {
    if (kernel == 0 || kernel % 2 == 0) throw ParameterError("conv2d: kernel size must be odd, got " + std::to_string(kernel));
    if (out_channels == 0 || in_channels == 0) throw ParameterError("conv2d: channel counts must be positive");
    ConvParams p;
    p.out_channels = out_channels;
    p.in_channels = in_channels;
    p.kernel = kernel;
    p.weights.assign(out_channels * in_channels * kernel * kernel, T(0));
    p.bias.assign(out_channels, T(0));
    return p;
}

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvParams<T>& params) {
    check_conv(input, params);
    const auto& s = input.shape();
    const std::size_t hw = s.plane();
    const std::size_t rows = params.fan_in();
    Tensor4<T> out(s.n, params.out_channels, s.h, s.w);
    std::vector<T> cols(rows * hw);
    Eigen::Map<const RowMat<T>> wmat(params.weights.data(), static_cast<Eigen::Index>(params.out_channels),
                                     static_cast<Eigen::Index>(rows));
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params.bias.data(),
                                                               static_cast<Eigen::Index>(params.out_channels));
    for (std::size_t b = 0; b < s.n; ++b) {
        im2col(input.sample(b).data(), s.c, s.h, s.w, params.kernel, cols.data());
        Eigen::Map<const RowMat<T>> cmat(cols.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
        Eigen::Map<RowMat<T>> omat(out.sample(b).data(), static_cast<Eigen::Index>(params.out_channels),
                                   static_cast<Eigen::Index>(hw));
        omat.noalias() = wmat * cmat;
        omat.colwise() += bias;
    }
    debug_check_finite(out, "conv2d_forward");
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvParams<T>& params, const Tensor4<T>& grad_out,
                             bool need_input_grad) {
    check_conv(input, params);
    const auto& s = input.shape();
    require_shape(grad_out.shape(), Shape4{s.n, params.out_channels, s.h, s.w}, "conv2d_backward grad_out");
    const std::size_t hw = s.plane();
    const std::size_t rows = params.fan_in();
    const auto M = static_cast<Eigen::Index>(params.out_channels);

    ConvGrads<T> g;
    g.grad_weights.assign(params.weights.size(), T(0));
    g.grad_bias.assign(params.out_channels, T(0));
    if (need_input_grad) g.grad_input = Tensor4<T>(s);

    std::vector<T> cols(rows * hw);
    std::vector<T> grad_cols(need_input_grad ? rows * hw : 0);
    Eigen::Map<const RowMat<T>> wmat(params.weights.data(), M, static_cast<Eigen::Index>(rows));
    Eigen::Map<RowMat<T>> gw(g.grad_weights.data(), M, static_cast<Eigen::Index>(rows));
    for (std::size_t b = 0; b < s.n; ++b) {
        Eigen::Map<const RowMat<T>> go(grad_out.sample(b).data(), M, static_cast<Eigen::Index>(hw));
        im2col(input.sample(b).data(), s.c, s.h, s.w, params.kernel, cols.data());
        Eigen::Map<const RowMat<T>> cmat(cols.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
        gw.noalias() += go * cmat.transpose();
        for (std::size_t m = 0; m < params.out_channels; ++m) {
            auto plane = grad_out.plane(b, m);
            double sum = 0.0;
            for (T v : plane) sum += v;
            g.grad_bias[m] += static_cast<T>(sum);
        }
        if (need_input_grad) {
            Eigen::Map<RowMat<T>> gc(grad_cols.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(hw));
            gc.noalias() = wmat.transpose() * go;
            col2im(grad_cols.data(), s.c, s.h, s.w, params.kernel, g.grad_input.sample(b).data());
        }
    }
    return g;
}

template <typename T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& input, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("leaky_relu: alpha must lie in [0, 1]");
    Tensor4<T> out(input.shape());
    const T a = static_cast<T>(alpha);
    auto src = input.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < src.size(); ++k) {
        const T z = src[k];
        dst[k] = z >= T(0) ? z : a * z;
    }
    return out;
}

template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& input, double alpha, const Tensor4<T>& grad_out) {
    require_shape(grad_out.shape(), input.shape(), "leaky_relu_backward");
    Tensor4<T> out(input.shape());
    const T a = static_cast<T>(alpha);
    auto z = input.data();
    auto g = grad_out.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < z.size(); ++k) dst[k] = z[k] >= T(0) ? g[k] : a * g[k];
    return out;
}

template <typename T>
BatchNormParams<T> BatchNormParams<T>::identity(std::size_t channels, double epsilon, double momentum) {
    if (!(epsilon > 0.0)) throw ParameterError("batchnorm: epsilon must be > 0");
    if (!(momentum >= 0.0 && momentum <= 1.0)) throw ParameterError("batchnorm: momentum must lie in [0, 1]");
    BatchNormParams p;
    p.gamma.assign(channels, T(1));
    p.beta.assign(channels, T(0));
    p.running_mean.assign(channels, T(0));
    p.running_var.assign(channels, T(1));
    p.epsilon = epsilon;
    p.momentum = momentum;
    return p;
}

template <typename T>
Tensor4<T> batchnorm_infer(const Tensor4<T>& input, const BatchNormParams<T>& params) {
    const auto& s = input.shape();
    if (params.channels() != s.c || params.running_mean.size() != s.c || params.running_var.size() != s.c) {
        throw ShapeError("batchnorm: " + std::to_string(params.channels()) + " channels of parameters for input " +
                         s.str());
    }
    Tensor4<T> out(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(params.running_var[c]) + params.epsilon);
        const double mean = params.running_mean[c];
        const double g = params.gamma[c];
        const double bt = params.beta[c];
        for (std::size_t b = 0; b < s.n; ++b) {
            auto src = input.plane(b, c);
            auto dst = out.plane(b, c);
            for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<T>(g * ((src[k] - mean) * inv) + bt);
        }
    }
    return out;
}

template <typename T>
BatchNormForward<T> batchnorm_forward(const Tensor4<T>& input, BatchNormParams<T>& params, Mode mode) {
    const auto& s = input.shape();
    const std::size_t C = s.c;
    if (params.channels() != C || params.beta.size() != C || params.running_mean.size() != C ||
        params.running_var.size() != C) {
        throw ShapeError("batchnorm: " + std::to_string(params.channels()) + " channels of parameters for input " +
                         s.str());
    }
    const std::size_t count = s.n * s.plane();
    BatchNormForward<T> result;
    result.output = Tensor4<T>(s);
    auto& cache = result.cache;
    cache.mode = mode;
    cache.gamma = params.gamma;
    cache.inv_std.resize(C);

    if (mode == Mode::Infer) {
        result.output = batchnorm_infer(input, params);
        for (std::size_t c = 0; c < C; ++c) {
            cache.inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(params.running_var[c]) + params.epsilon));
        }
        return result;
    }

    if (count < 2) {
        throw ParameterError("batchnorm: training statistics need at least two values per channel, input " + s.str());
    }
    cache.normalized = Tensor4<T>(s);
    for (std::size_t c = 0; c < C; ++c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < s.n; ++b) {
            for (T v : input.plane(b, c)) sum += v;
        }
        const double mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (std::size_t b = 0; b < s.n; ++b) {
            for (T v : input.plane(b, c)) sq += (v - mean) * (v - mean);
        }
        const double var = sq / static_cast<double>(count);
        const double inv = 1.0 / std::sqrt(var + params.epsilon);
        const double g = params.gamma[c];
        const double bt = params.beta[c];
        cache.inv_std[c] = static_cast<T>(inv);
        for (std::size_t b = 0; b < s.n; ++b) {
            auto src = input.plane(b, c);
            auto xhat = cache.normalized.plane(b, c);
            auto dst = result.output.plane(b, c);
            for (std::size_t k = 0; k < src.size(); ++k) {
                const double xn = (src[k] - mean) * inv;
                xhat[k] = static_cast<T>(xn);
                dst[k] = static_cast<T>(g * xn + bt);
            }
        }
        const double unbiased = sq / static_cast<double>(count - 1);
        params.running_mean[c] = static_cast<T>(params.momentum * params.running_mean[c] + (1.0 - params.momentum) * mean);
        params.running_var[c] = static_cast<T>(params.momentum * params.running_var[c] + (1.0 - params.momentum) * unbiased);
    }
    debug_check_finite(result.output, "batchnorm_forward");
    return result;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const Tensor4<T>& grad_out) {
    if (cache.mode != Mode::Train) throw ContractError("batchnorm_backward: cache comes from an inference forward");
    const auto& s = cache.normalized.shape();
    require_shape(grad_out.shape(), s, "batchnorm_backward grad_out");
    const std::size_t C = s.c;
    const double count = static_cast<double>(s.n * s.plane());
    BatchNormGrads<T> g;
    g.grad_input = Tensor4<T>(s);
    g.grad_gamma.assign(C, T(0));
    g.grad_beta.assign(C, T(0));
    for (std::size_t c = 0; c < C; ++c) {
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < s.n; ++b) {
            auto dy = grad_out.plane(b, c);
            auto xhat = cache.normalized.plane(b, c);
            for (std::size_t k = 0; k < dy.size(); ++k) {
                sum_dy += dy[k];
                sum_dy_xhat += static_cast<double>(dy[k]) * xhat[k];
            }
        }
        g.grad_gamma[c] = static_cast<T>(sum_dy_xhat);
        g.grad_beta[c] = static_cast<T>(sum_dy);
        const double scale = static_cast<double>(cache.gamma[c]) * cache.inv_std[c] / count;
        for (std::size_t b = 0; b < s.n; ++b) {
            auto dy = grad_out.plane(b, c);
            auto xhat = cache.normalized.plane(b, c);
            auto dx = g.grad_input.plane(b, c);
            for (std::size_t k = 0; k < dy.size(); ++k) {
                dx[k] = static_cast<T>(scale * (count * dy[k] - sum_dy - xhat[k] * sum_dy_xhat));
            }
        }
    }
    return g;
}

template <typename T>
void he_init(std::span<T> weights, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw ParameterError("he_init: fan_in must be positive");
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (T& w : weights) w = static_cast<T>(dist(rng));
}

template <typename T>
void debug_check_finite([[maybe_unused]] const Tensor4<T>& t, [[maybe_unused]] const char* context) {
#ifndef NDEBUG
    if (!t.all_finite()) throw ContractError(std::string(context) + ": non-finite value in output");
#endif
}

#define FPD_INSTANTIATE_LAYERS(T)                                                                              \
    template struct ConvParams<T>;                                                                             \
    template struct BatchNormParams<T>;                                                                        \
    template Tensor4<T> conv2d_forward(const Tensor4<T>&, const ConvParams<T>&);                               \
    template ConvGrads<T> conv2d_backward(const Tensor4<T>&, const ConvParams<T>&, const Tensor4<T>&, bool);   \
    template Tensor4<T> leaky_relu_forward(const Tensor4<T>&, double);                                         \
    template Tensor4<T> leaky_relu_backward(const Tensor4<T>&, double, const Tensor4<T>&);                     \
    template Tensor4<T> batchnorm_infer(const Tensor4<T>&, const BatchNormParams<T>&);                         \
    template BatchNormForward<T> batchnorm_forward(const Tensor4<T>&, BatchNormParams<T>&, Mode);              \
    template BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>&, const Tensor4<T>&);                \
    template void he_init(std::span<T>, std::size_t, Rng&);                                                    \
    template void debug_check_finite(const Tensor4<T>&, const char*);

FPD_INSTANTIATE_LAYERS(float)
FPD_INSTANTIATE_LAYERS(double)

}  // namespace fpd::nn
