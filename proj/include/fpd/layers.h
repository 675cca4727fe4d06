#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fpd/rng.h"
#include "fpd/tensor.h"

namespace fpd::nn {

enum class Mode { Train, Infer };

// Same-padded, stride-1 convolution filters. weights are (out, in, k, k).
template <typename T>
struct ConvParams {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel = 0;
    std::vector<T> weights;
    std::vector<T> bias;

    // Zero-filled filters; throws ParameterError for an even or zero kernel.
    static ConvParams zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kernel);
    std::size_t fan_in() const noexcept { return in_channels * kernel * kernel; }

    bool operator==(const ConvParams&) const = default;
};

template <typename T>
struct ConvGrads {
    Tensor4<T> grad_input; // empty when not requested
    std::vector<T> grad_weights;
    std::vector<T> grad_bias;
};

// out[b,m,y,x] = bias[m] + sum_{c,u,v} w[m,c,u,v] * in_padded[b,c,y+u,x+v]
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvParams<T>& params);

// Exact gradients of conv2d_forward. grad_input is the full correlation of
// grad_out with the 180-degree rotated filters.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& input, const ConvParams<T>& params, const Tensor4<T>& grad_out,
                             bool need_input_grad = true);

// h = max(z, 0) + alpha * min(z, 0)
template <typename T>
Tensor4<T> leaky_relu_forward(const Tensor4<T>& input, double alpha);

// Slope 1 for z >= 0, alpha otherwise.
template <typename T>
Tensor4<T> leaky_relu_backward(const Tensor4<T>& input, double alpha, const Tensor4<T>& grad_out);

template <typename T>
struct BatchNormParams {
    std::vector<T> gamma;
    std::vector<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    double epsilon = 1e-5;
    // Weight of the old running statistic in each update.
    double momentum = 0.9;

    // gamma = 1, beta = 0, running mean 0, running variance 1.
    static BatchNormParams identity(std::size_t channels, double epsilon = 1e-5, double momentum = 0.9);
    std::size_t channels() const noexcept { return gamma.size(); }

    bool operator==(const BatchNormParams&) const = default;
};

template <typename T>
struct BatchNormCache {
    Mode mode = Mode::Infer;
    Tensor4<T> normalized;   // x_hat
    std::vector<T> inv_std;  // 1 / sqrt(var + eps), per channel
    std::vector<T> gamma;
};

template <typename T>
struct BatchNormForward {
    Tensor4<T> output;
    BatchNormCache<T> cache;
};

// Train: batch statistics over (batch, H, W), population variance for the
// normalization, unbiased variance folded into the running estimate.
// Infer: running statistics. Throws ParameterError in Train mode when a
// channel has fewer than two values.
template <typename T>
BatchNormForward<T> batchnorm_forward(const Tensor4<T>& input, BatchNormParams<T>& params, Mode mode);

// Inference-mode normalization with the running statistics; no cache.
template <typename T>
Tensor4<T> batchnorm_infer(const Tensor4<T>& input, const BatchNormParams<T>& params);

template <typename T>
struct BatchNormGrads {
    Tensor4<T> grad_input;
    std::vector<T> grad_gamma;
    std::vector<T> grad_beta;
};

// Throws ContractError for a cache produced in Infer mode.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const Tensor4<T>& grad_out);

// Draws i.i.d. N(0, 2 / fan_in) into `weights`.
template <typename T>
void he_init(std::span<T> weights, std::size_t fan_in, Rng& rng);

// In debug builds, throws ContractError when `t` holds a NaN or Inf.
template <typename T>
void debug_check_finite(const Tensor4<T>& t, const char* context);

}  // namespace fpd::nn
