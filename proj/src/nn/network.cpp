#include "fpd/network.h"

#include <string>

#include "fpd/error.h"
#include "fpd/json_util.h"

namespace fpd {

void NetworkConfig::validate() const {
    if (stages < 1) throw ParameterError("network: at least one stage is required");
    if (layers_per_stage < 3) throw ParameterError("network: a stage needs at least 3 layers (first, middle, last)");
    if (filters < 1) throw ParameterError("network: filter count must be positive");
    if (kernel == 0 || kernel % 2 == 0) throw ParameterError("network: kernel size must be odd");
    if (!(alpha_first >= 0.0 && alpha_first <= 1.0) || !(alpha_rest >= 0.0 && alpha_rest <= 1.0)) {
        throw ParameterError("network: Leaky ReLU slopes must lie in [0, 1]");
    }
    if (!(bn_epsilon > 0.0)) throw ParameterError("network: bn_epsilon must be > 0");
    if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ParameterError("network: bn_momentum must lie in [0, 1]");
}

nlohmann::json to_json(const NetworkConfig& c) {
    return {{"stages", c.stages},
            {"layers_per_stage", c.layers_per_stage},
            {"filters", c.filters},
            {"kernel", c.kernel},
            {"alpha_first", c.alpha_first},
            {"alpha_rest", c.alpha_rest},
            {"stage_wiring", c.wiring == StageWiring::NoiseChain ? "noise_chain" : "image_chain"},
            {"bn_epsilon", c.bn_epsilon},
            {"bn_momentum", c.bn_momentum}};
}

NetworkConfig network_config_from_json(const nlohmann::json& doc) {
    using namespace json_util;
    require_object(doc, "network");
    reject_unknown_keys(doc,
                        {"stages", "layers_per_stage", "filters", "kernel", "alpha_first", "alpha_rest",
                         "stage_wiring", "bn_epsilon", "bn_momentum"},
                        "network");
    NetworkConfig c;
    c.stages = get_uint(doc, "stages", c.stages);
    c.layers_per_stage = get_uint(doc, "layers_per_stage", c.layers_per_stage);
    c.filters = get_uint(doc, "filters", c.filters);
    c.kernel = get_uint(doc, "kernel", c.kernel);
    c.alpha_first = get_number(doc, "alpha_first", c.alpha_first);
    c.alpha_rest = get_number(doc, "alpha_rest", c.alpha_rest);
    c.bn_epsilon = get_number(doc, "bn_epsilon", c.bn_epsilon);
    c.bn_momentum = get_number(doc, "bn_momentum", c.bn_momentum);
    const std::string wiring = get_string(doc, "stage_wiring", "noise_chain");
    if (wiring == "noise_chain") {
        c.wiring = StageWiring::NoiseChain;
    } else if (wiring == "image_chain") {
        c.wiring = StageWiring::ImageChain;
    } else {
        throw DataError("network: stage_wiring must be 'noise_chain' or 'image_chain'");
    }
    c.validate();
    return c;
}

template <typename T>
NetworkParams<T> zero_network(const NetworkConfig& config) {
    config.validate();
    NetworkParams<T> params;
    const std::size_t middle = config.layers_per_stage - 2;
    for (std::size_t s = 0; s < config.stages; ++s) {
        StageParams<T> stage;
        stage.first = nn::ConvParams<T>::zeros(config.filters, 1, config.kernel);
        for (std::size_t l = 0; l < middle; ++l) {
            stage.middle_conv.push_back(nn::ConvParams<T>::zeros(config.filters, config.filters, config.kernel));
            stage.middle_bn.push_back(nn::BatchNormParams<T>::identity(config.filters, config.bn_epsilon, config.bn_momentum));
        }
        stage.last = nn::ConvParams<T>::zeros(1, config.filters, config.kernel);
        params.stages.push_back(std::move(stage));
    }
    return params;
}

template <typename T>
NetworkParams<T> build_network(const NetworkConfig& config, Rng& rng) {
    NetworkParams<T> params = zero_network<T>(config);
    for_each_tensor(params, [&](const TensorInfo& info, std::vector<T>& data) {
        if (info.shape.size() == 4) nn::he_init<T>(data, info.shape[1] * info.shape[2] * info.shape[3], rng);
    });
    return params;
}

template <typename T>
NetworkParams<T> zeros_like(const NetworkParams<T>& params) {
    NetworkParams<T> out = params;
    for_each_tensor(out, [](const TensorInfo&, std::vector<T>& data) { std::fill(data.begin(), data.end(), T(0)); });
    return out;
}

std::size_t learnable_parameter_count(const NetworkConfig& config) {
    const std::size_t k2 = config.kernel * config.kernel;
    const std::size_t f = config.filters;
    const std::size_t per_stage = (f * k2 + f) + (config.layers_per_stage - 2) * (f * f * k2 + f + 2 * f) + (f * k2 + 1);
    return config.stages * per_stage;
}

template <typename T>
std::size_t learnable_parameter_count(const NetworkParams<T>& params) {
    std::size_t total = 0;
    for_each_tensor(params, [&](const TensorInfo& info, const std::vector<T>& data) {
        if (info.learnable) total += data.size();
    });
    return total;
}

template <typename T>
void check_layout(const NetworkParams<T>& params, const NetworkConfig& config) {
    const NetworkParams<T> expected = zero_network<T>(config);
    std::vector<TensorInfo> want;
    for_each_tensor(expected, [&](const TensorInfo& info, const std::vector<T>&) { want.push_back(info); });
    std::size_t k = 0;
    for_each_tensor(params, [&](const TensorInfo& info, const std::vector<T>& data) {
        std::size_t count = 1;
        for (auto d : info.shape) count *= d;
        if (k >= want.size() || info.name != want[k].name || info.shape != want[k].shape || data.size() != count) {
            throw ShapeError("network parameters do not match the configured layout at '" + info.name + "'");
        }
        ++k;
    });
    if (k != want.size()) throw ShapeError("network parameters do not match the configured layout (tensor count)");
}

template <typename To, typename From>
NetworkParams<To> network_cast(const NetworkParams<From>& params) {
    NetworkParams<To> out;
    auto conv = [](const nn::ConvParams<From>& c) {
        nn::ConvParams<To> o;
        o.out_channels = c.out_channels;
        o.in_channels = c.in_channels;
        o.kernel = c.kernel;
        o.weights.assign(c.weights.begin(), c.weights.end());
        o.bias.assign(c.bias.begin(), c.bias.end());
        return o;
    };
    for (const auto& s : params.stages) {
        StageParams<To> stage;
        stage.first = conv(s.first);
        for (const auto& c : s.middle_conv) stage.middle_conv.push_back(conv(c));
        for (const auto& b : s.middle_bn) {
            nn::BatchNormParams<To> o;
            o.gamma.assign(b.gamma.begin(), b.gamma.end());
            o.beta.assign(b.beta.begin(), b.beta.end());
            o.running_mean.assign(b.running_mean.begin(), b.running_mean.end());
            o.running_var.assign(b.running_var.begin(), b.running_var.end());
            o.epsilon = b.epsilon;
            o.momentum = b.momentum;
            stage.middle_bn.push_back(std::move(o));
        }
        stage.last = conv(s.last);
        out.stages.push_back(std::move(stage));
    }
    return out;
}

namespace {

// `stats` receives the running-statistics updates in Train mode and may be
// the same object as `stage`.
template <typename T>
Tensor4<T> run_stage(const Tensor4<T>& input, const StageParams<T>& stage, StageParams<T>* stats,
                     const NetworkConfig& config, nn::Mode mode, StageCache<T>* cache) {
    if (input.channels() != 1) {
        throw ShapeError("stage input must have one channel, got " + input.shape().str());
    }
    if (cache) cache->layers.clear();
    auto record = [&](Tensor4<T> conv_input, Tensor4<T> pre, nn::BatchNormCache<T> bn) {
        if (cache) cache->layers.push_back({std::move(conv_input), std::move(pre), std::move(bn)});
    };

    Tensor4<T> pre = nn::conv2d_forward(input, stage.first);
    Tensor4<T> act = nn::leaky_relu_forward(pre, config.alpha_first);
    record(input, std::move(pre), {});

    for (std::size_t l = 0; l < stage.middle_conv.size(); ++l) {
        Tensor4<T> conv = nn::conv2d_forward(act, stage.middle_conv[l]);
        Tensor4<T> normalized;
        nn::BatchNormCache<T> bn_cache;
        if (mode == nn::Mode::Train) {
            if (!stats) throw ContractError("stage_forward: training needs mutable parameters");
            auto bn = nn::batchnorm_forward(conv, stats->middle_bn[l], nn::Mode::Train);
            normalized = std::move(bn.output);
            bn_cache = std::move(bn.cache);
        } else {
            normalized = nn::batchnorm_infer(conv, stage.middle_bn[l]);
        }
        Tensor4<T> next = nn::leaky_relu_forward(normalized, config.alpha_rest);
        record(std::move(act), std::move(normalized), std::move(bn_cache));
        act = std::move(next);
    }

    Tensor4<T> out = nn::conv2d_forward(act, stage.last);
    record(std::move(act), {}, {});
    return out;
}

template <typename T>
Tensor4<T> subtract(const Tensor4<T>& a, const Tensor4<T>& b) {
    Tensor4<T> out(a.shape());
    auto x = a.data();
    auto y = b.data();
    auto d = out.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = x[k] - y[k];
    return out;
}

template <typename T>
void accumulate(Tensor4<T>& into, const Tensor4<T>& add, T sign = T(1)) {
    auto d = into.data();
    auto s = add.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += sign * s[k];
}

template <typename T>
NetworkForward<T> forward_impl(const Tensor4<T>& z, const NetworkParams<T>& params, NetworkParams<T>* stats,
                               const NetworkConfig& config, nn::Mode mode) {
    config.validate();
    if (z.channels() != 1) throw ShapeError("network input must have one channel, got " + z.shape().str());
    if (params.stages.size() != config.stages) throw ShapeError("network parameters have the wrong number of stages");
    NetworkForward<T> result;
    result.cache.mode = mode;
    result.cache.input_shape = z.shape();
    if (mode == nn::Mode::Train) result.cache.stages.resize(config.stages);

    Tensor4<T> stage_input = z;
    Tensor4<T> estimate;
    Tensor4<T> total;
    for (std::size_t s = 0; s < config.stages; ++s) {
        StageCache<T>* cache = mode == nn::Mode::Train ? &result.cache.stages[s] : nullptr;
        StageParams<T>* stage_stats = stats ? &stats->stages[s] : nullptr;
        estimate = run_stage(stage_input, params.stages[s], stage_stats, config, mode, cache);
        if (config.wiring == StageWiring::NoiseChain) {
            if (s + 1 < config.stages) stage_input = estimate;
        } else {
            if (s == 0) {
                total = estimate;
            } else {
                accumulate(total, estimate);
            }
            if (s + 1 < config.stages) stage_input = subtract(stage_input, estimate);
        }
    }
    result.residual = config.wiring == StageWiring::NoiseChain ? std::move(estimate) : std::move(total);
    nn::debug_check_finite(result.residual, "network_forward");
    return result;
}

template <typename T>
void backward_stage(const StageCache<T>& cache, const Tensor4<T>& grad_out, const StageParams<T>& stage,
                    StageParams<T>& grads, const NetworkConfig& config, Tensor4<T>* grad_input) {
    const auto& layers = cache.layers;
    const std::size_t middle = stage.middle_conv.size();

    auto last = nn::conv2d_backward(layers[middle + 1].conv_input, stage.last, grad_out, true);
    grads.last.weights = std::move(last.grad_weights);
    grads.last.bias = std::move(last.grad_bias);
    Tensor4<T> grad = std::move(last.grad_input);

    for (std::size_t l = middle; l-- > 0;) {
        const auto& lc = layers[l + 1];
        Tensor4<T> g_norm = nn::leaky_relu_backward(lc.pre_activation, config.alpha_rest, grad);
        auto bn = nn::batchnorm_backward(lc.bn, g_norm);
        grads.middle_bn[l].gamma = std::move(bn.grad_gamma);
        grads.middle_bn[l].beta = std::move(bn.grad_beta);
        auto conv = nn::conv2d_backward(lc.conv_input, stage.middle_conv[l], bn.grad_input, true);
        grads.middle_conv[l].weights = std::move(conv.grad_weights);
        grads.middle_conv[l].bias = std::move(conv.grad_bias);
        grad = std::move(conv.grad_input);
    }

    Tensor4<T> g_pre = nn::leaky_relu_backward(layers[0].pre_activation, config.alpha_first, grad);
    auto first = nn::conv2d_backward(layers[0].conv_input, stage.first, g_pre, grad_input != nullptr);
    grads.first.weights = std::move(first.grad_weights);
    grads.first.bias = std::move(first.grad_bias);
    if (grad_input) *grad_input = std::move(first.grad_input);
}

}  // namespace

template <typename T>
Tensor4<T> stage_forward(const Tensor4<T>& input, StageParams<T>& stage, const NetworkConfig& config, nn::Mode mode,
                         StageCache<T>* cache) {
    return run_stage(input, stage, &stage, config, mode, cache);
}

template <typename T>
NetworkForward<T> network_forward(const Tensor4<T>& z, NetworkParams<T>& params, const NetworkConfig& config,
                                  nn::Mode mode) {
    return forward_impl(z, params, &params, config, mode);
}

template <typename T>
Tensor4<T> network_infer(const Tensor4<T>& z, const NetworkParams<T>& params, const NetworkConfig& config) {
    return forward_impl<T>(z, params, nullptr, config, nn::Mode::Infer).residual;
}

template <typename T>
NetworkParams<T> network_backward(const NetworkCache<T>& cache, const Tensor4<T>& grad_residual,
                                  const NetworkParams<T>& params, const NetworkConfig& config) {
    if (cache.mode != nn::Mode::Train || cache.stages.size() != config.stages) {
        throw ContractError("network_backward: cache does not come from a training forward pass");
    }
    require_shape(grad_residual.shape(), cache.input_shape, "network_backward grad");
    NetworkParams<T> grads = zeros_like(params);

    if (config.wiring == StageWiring::NoiseChain) {
        Tensor4<T> grad = grad_residual;
        for (std::size_t s = config.stages; s-- > 0;) {
            Tensor4<T> grad_in;
            backward_stage(cache.stages[s], grad, params.stages[s], grads.stages[s], config, s > 0 ? &grad_in : nullptr);
            if (s > 0) grad = std::move(grad_in);
        }
    } else {
        // residual = sum_s v_s with input_{s+1} = input_s - v_s.
        Tensor4<T> grad_next_input(cache.input_shape);
        for (std::size_t s = config.stages; s-- > 0;) {
            Tensor4<T> grad_v = grad_residual;
            accumulate(grad_v, grad_next_input, T(-1));
            Tensor4<T> grad_in;
            backward_stage(cache.stages[s], grad_v, params.stages[s], grads.stages[s], config, s > 0 ? &grad_in : nullptr);
            if (s > 0) accumulate(grad_next_input, grad_in);
        }
    }
    return grads;
}

template <typename T>
FringeImage denoise(const FringeImage& z, const NetworkParams<T>& params, const NetworkConfig& config) {
    if (z.width() < config.kernel || z.height() < config.kernel) {
        throw ShapeError("denoise: image " + std::to_string(z.width()) + "x" + std::to_string(z.height()) +
                         " is smaller than the " + std::to_string(config.kernel) + "-pixel kernel");
    }
    Tensor4<T> input(1, 1, z.height(), z.width());
    auto src = z.data();
    auto dst = input.data();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<T>(src[k]);
    const Tensor4<T> residual = network_infer(input, params, config);
    FringeImage out(z.width(), z.height());
    auto r = residual.data();
    auto o = out.data();
    for (std::size_t k = 0; k < src.size(); ++k) o[k] = src[k] - static_cast<double>(r[k]);
    return out;
}

#define FPD_INSTANTIATE_NETWORK(T)                                                                                  \
    template NetworkParams<T> zero_network<T>(const NetworkConfig&);                                                \
    template NetworkParams<T> build_network<T>(const NetworkConfig&, Rng&);                                         \
    template NetworkParams<T> zeros_like(const NetworkParams<T>&);                                                  \
    template std::size_t learnable_parameter_count(const NetworkParams<T>&);                                        \
    template void check_layout(const NetworkParams<T>&, const NetworkConfig&);                                      \
    template Tensor4<T> stage_forward(const Tensor4<T>&, StageParams<T>&, const NetworkConfig&, nn::Mode,          \
                                      StageCache<T>*);                                                              \
    template NetworkForward<T> network_forward(const Tensor4<T>&, NetworkParams<T>&, const NetworkConfig&, nn::Mode); \
    template Tensor4<T> network_infer(const Tensor4<T>&, const NetworkParams<T>&, const NetworkConfig&);            \
    template NetworkParams<T> network_backward(const NetworkCache<T>&, const Tensor4<T>&, const NetworkParams<T>&,  \
                                               const NetworkConfig&);                                               \
    template FringeImage denoise(const FringeImage&, const NetworkParams<T>&, const NetworkConfig&);

FPD_INSTANTIATE_NETWORK(float)
FPD_INSTANTIATE_NETWORK(double)

template NetworkParams<double> network_cast<double, float>(const NetworkParams<float>&);
template NetworkParams<float> network_cast<float, double>(const NetworkParams<double>&);
template NetworkParams<float> network_cast<float, float>(const NetworkParams<float>&);
template NetworkParams<double> network_cast<double, double>(const NetworkParams<double>&);

}  // namespace fpd
