#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fpd/fringe_image.h"
#include "fpd/layers.h"
#include "fpd/rng.h"
#include "fpd/tensor.h"

namespace fpd {

// noise_chain: stage s > 1 consumes the noise estimate of stage s-1 and the
// last estimate is the residual. image_chain: stage s > 1 consumes the input
// of stage s-1 minus its estimate, and the residual is the sum of estimates.
enum class StageWiring { NoiseChain, ImageChain };

struct NetworkConfig {
    std::size_t stages = 3;
    std::size_t layers_per_stage = 8;
    std::size_t filters = 64;
    std::size_t kernel = 5;
    double alpha_first = 0.05; // Leaky ReLU slope of the first layer of each stage
    double alpha_rest = 0.5;   // slope of the middle layers
    StageWiring wiring = StageWiring::NoiseChain;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;

    void validate() const;
    // Spatial radius over which one input pixel can influence the output.
    std::size_t receptive_radius() const noexcept { return stages * layers_per_stage * (kernel / 2); }

    bool operator==(const NetworkConfig&) const = default;
};

nlohmann::json to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& doc);

// Layer 1: conv(filters x 1) + LeakyReLU; layers 2..D-1: conv + BN + LeakyReLU;
// layer D: conv(1 x filters).
template <typename T>
struct StageParams {
    nn::ConvParams<T> first;
    std::vector<nn::ConvParams<T>> middle_conv;
    std::vector<nn::BatchNormParams<T>> middle_bn;
    nn::ConvParams<T> last;

    bool operator==(const StageParams&) const = default;
};

// Also used to hold gradients, in which case the BN running statistics are unused.
template <typename T>
struct NetworkParams {
    std::vector<StageParams<T>> stages;

    bool operator==(const NetworkParams&) const = default;
};

// Visits every tensor in a fixed order: per stage, first conv (weight, bias),
// each middle layer (weight, bias, gamma, beta, running_mean, running_var),
// last conv (weight, bias). `learnable` is false for the running statistics.
struct TensorInfo {
    std::string name;
    std::vector<std::size_t> shape;
    bool learnable = true;
};

template <typename T, typename Fn>
void for_each_tensor(NetworkParams<T>& params, Fn&& fn);
template <typename T, typename Fn>
void for_each_tensor(const NetworkParams<T>& params, Fn&& fn);

// Zero-initialized parameters with the stage layout of `config`.
template <typename T>
NetworkParams<T> zero_network(const NetworkConfig& config);

// Filters from he_init, zero biases, gamma 1, beta 0.
template <typename T>
NetworkParams<T> build_network(const NetworkConfig& config, Rng& rng);

// Zero-filled gradient holder shaped like `params`.
template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T>& params);

std::size_t learnable_parameter_count(const NetworkConfig& config);
template <typename T>
std::size_t learnable_parameter_count(const NetworkParams<T>& params);

// Throws ShapeError if `params` does not have the layout of `config`.
template <typename T>
void check_layout(const NetworkParams<T>& params, const NetworkConfig& config);

template <typename To, typename From>
NetworkParams<To> network_cast(const NetworkParams<From>& params);

template <typename T>
struct LayerCache {
    Tensor4<T> conv_input;
    Tensor4<T> pre_activation;
    nn::BatchNormCache<T> bn;
};

template <typename T>
struct StageCache {
    std::vector<LayerCache<T>> layers;
};

template <typename T>
struct NetworkCache {
    nn::Mode mode = nn::Mode::Infer;
    Shape4 input_shape;
    std::vector<StageCache<T>> stages;
};

// One stage applied to a single-channel input. A non-null cache is filled
// for the backward pass.
template <typename T>
Tensor4<T> stage_forward(const Tensor4<T>& input, StageParams<T>& stage, const NetworkConfig& config, nn::Mode mode,
                         StageCache<T>* cache);

template <typename T>
struct NetworkForward {
    Tensor4<T> residual;
    NetworkCache<T> cache;
};

// Residual (noise) estimate for a batch of single-channel images. Train mode
// updates BN running statistics and keeps the caches; Infer mode keeps none.
template <typename T>
NetworkForward<T> network_forward(const Tensor4<T>& z, NetworkParams<T>& params, const NetworkConfig& config,
                                  nn::Mode mode);

// Inference-only forward that leaves the parameters untouched.
template <typename T>
Tensor4<T> network_infer(const Tensor4<T>& z, const NetworkParams<T>& params, const NetworkConfig& config);

// Gradient of <residual, grad_residual> with respect to every learnable
// parameter, through all stages. Throws ContractError for an Infer cache.
template <typename T>
NetworkParams<T> network_backward(const NetworkCache<T>& cache, const Tensor4<T>& grad_residual,
                                  const NetworkParams<T>& params, const NetworkConfig& config);

// x = z - R(z), Infer mode, no clamping.
template <typename T>
FringeImage denoise(const FringeImage& z, const NetworkParams<T>& params, const NetworkConfig& config);

// ---------------------------------------------------------------------------

namespace detail {

template <typename P, typename Fn>
void visit_tensors(P& params, Fn& fn) {
    for (std::size_t s = 0; s < params.stages.size(); ++s) {
        auto& stage = params.stages[s];
        const std::string prefix = "stage" + std::to_string(s + 1) + ".layer";
        auto conv = [&](auto& c, std::size_t layer) {
            const std::string base = prefix + std::to_string(layer);
            fn(TensorInfo{base + ".weight", {c.out_channels, c.in_channels, c.kernel, c.kernel}, true}, c.weights);
            fn(TensorInfo{base + ".bias", {c.out_channels}, true}, c.bias);
        };
        conv(stage.first, 1);
        for (std::size_t l = 0; l < stage.middle_conv.size(); ++l) {
            conv(stage.middle_conv[l], l + 2);
            auto& bn = stage.middle_bn[l];
            const std::string base = prefix + std::to_string(l + 2) + ".bn";
            fn(TensorInfo{base + ".gamma", {bn.gamma.size()}, true}, bn.gamma);
            fn(TensorInfo{base + ".beta", {bn.beta.size()}, true}, bn.beta);
            fn(TensorInfo{base + ".running_mean", {bn.running_mean.size()}, false}, bn.running_mean);
            fn(TensorInfo{base + ".running_var", {bn.running_var.size()}, false}, bn.running_var);
        }
        conv(stage.last, stage.middle_conv.size() + 2);
    }
}

}  // namespace detail

template <typename T, typename Fn>
void for_each_tensor(NetworkParams<T>& params, Fn&& fn) {
    detail::visit_tensors(params, fn);
}

template <typename T, typename Fn>
void for_each_tensor(const NetworkParams<T>& params, Fn&& fn) {
    detail::visit_tensors(params, fn);
}

}  // namespace fpd
