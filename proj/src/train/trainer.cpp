#include "fpd/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <set>

#include "fpd/checkpoint.h"
#include "fpd/error.h"
#include "fpd/json_util.h"

namespace fpd {

void TrainConfig::validate() const {
    if (batch_size < 2) throw ParameterError("train: batch_size must be at least 2");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ParameterError("train: learning_rate must be finite and non-negative");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ParameterError("train: beta1 and beta2 must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ParameterError("train: adam_eps must be > 0");
    if (eval_every < 1) throw ParameterError("train: eval_every must be at least 1");
    if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
        throw ParameterError("train: heldout_fraction must lie in [0, 1)");
    }
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},         {"beta1", c.beta1},
            {"beta2", c.beta2},           {"adam_eps", c.adam_eps},
            {"eval_every", c.eval_every}, {"heldout_fraction", c.heldout_fraction},
            {"max_eval_patches", c.max_eval_patches}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
    using namespace json_util;
    require_object(doc, "train");
    reject_unknown_keys(doc,
                        {"batch_size", "learning_rate", "epochs", "beta1", "beta2", "adam_eps", "eval_every",
                         "heldout_fraction", "max_eval_patches"},
                        "train");
    TrainConfig c;
    c.batch_size = get_uint(doc, "batch_size", c.batch_size);
    c.learning_rate = get_number(doc, "learning_rate", c.learning_rate);
    c.epochs = get_uint(doc, "epochs", c.epochs);
    c.beta1 = get_number(doc, "beta1", c.beta1);
    c.beta2 = get_number(doc, "beta2", c.beta2);
    c.adam_eps = get_number(doc, "adam_eps", c.adam_eps);
    c.eval_every = get_uint(doc, "eval_every", c.eval_every);
    c.heldout_fraction = get_number(doc, "heldout_fraction", c.heldout_fraction);
    c.max_eval_patches = get_uint(doc, "max_eval_patches", c.max_eval_patches);
    c.validate();
    return c;
}

std::string train_config_digest(const TrainConfig& config) {
    nlohmann::json doc = to_json(config);
    doc.erase("epochs");
    const std::string text = doc.dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

template <typename T>
LossResult<T> euclid_loss(const Tensor4<T>& v_pred, const Tensor4<T>& z, const Tensor4<T>& x) {
    require_shape(z.shape(), v_pred.shape(), "euclid_loss z");
    require_shape(x.shape(), v_pred.shape(), "euclid_loss x");
    const std::size_t k = v_pred.batch();
    if (k == 0) throw ShapeError("euclid_loss: empty batch");
    LossResult<T> out;
    out.grad = Tensor4<T>(v_pred.shape());
    auto v = v_pred.data();
    auto zz = z.data();
    auto xx = x.data();
    auto g = out.grad.data();
    const double inv_k = 1.0 / static_cast<double>(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = static_cast<double>(v[i]) - (static_cast<double>(zz[i]) - static_cast<double>(xx[i]));
        sum += r * r;
        g[i] = static_cast<T>(r * inv_k);
    }
    out.loss = 0.5 * sum * inv_k;
    return out;
}

template <typename T>
AdamState<T> adam_init(const NetworkParams<T>& params) {
    return {zeros_like(params), zeros_like(params), 0};
}

namespace {

template <typename T>
std::vector<std::vector<T>*> learnable_tensors(NetworkParams<T>& p) {
    std::vector<std::vector<T>*> out;
    for_each_tensor(p, [&](const TensorInfo& info, std::vector<T>& data) {
        if (info.learnable) out.push_back(&data);
    });
    return out;
}

template <typename T>
std::vector<const std::vector<T>*> learnable_tensors(const NetworkParams<T>& p) {
    std::vector<const std::vector<T>*> out;
    for_each_tensor(p, [&](const TensorInfo& info, const std::vector<T>& data) {
        if (info.learnable) out.push_back(&data);
    });
    return out;
}

}  // namespace

template <typename T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads, AdamState<T>& state, const TrainConfig& config) {
    auto p = learnable_tensors(params);
    auto g = learnable_tensors(grads);
    auto m = learnable_tensors(state.m);
    auto v = learnable_tensors(state.v);
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
        throw ShapeError("adam_step: gradient or state layout differs from the parameters");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < p.size(); ++k) {
        auto& pk = *p[k];
        const auto& gk = *g[k];
        auto& mk = *m[k];
        auto& vk = *v[k];
        if (gk.size() != pk.size() || mk.size() != pk.size() || vk.size() != pk.size()) {
            throw ShapeError("adam_step: tensor size mismatch");
        }
        for (std::size_t i = 0; i < pk.size(); ++i) {
            const double gi = gk[i];
            const double mi = config.beta1 * mk[i] + (1.0 - config.beta1) * gi;
            const double vi = config.beta2 * vk[i] + (1.0 - config.beta2) * gi * gi;
            mk[i] = static_cast<T>(mi);
            vk[i] = static_cast<T>(vi);
            const double update = config.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + config.adam_eps);
            pk[i] = static_cast<T>(pk[i] - update);
        }
    }
}

DataSplit split_by_source(const PatchDataset& data, double heldout_fraction, std::uint64_t seed) {
    std::set<std::uint32_t> unique;
    for (const auto& r : data.records()) unique.insert(r.source_id);
    std::vector<std::uint32_t> sources(unique.begin(), unique.end());
    Rng rng = derive_rng(seed, stream::kSplit);
    std::shuffle(sources.begin(), sources.end(), rng);
    std::size_t held = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(sources.size())));
    if (heldout_fraction > 0.0 && held == 0 && sources.size() > 1) held = 1;
    if (held >= sources.size()) held = sources.size() > 0 ? sources.size() - 1 : 0;
    const std::set<std::uint32_t> held_set(sources.begin(), sources.begin() + static_cast<std::ptrdiff_t>(held));

    DataSplit split;
    for (std::size_t k = 0; k < data.size(); ++k) {
        (held_set.count(data.records()[k].source_id) ? split.heldout : split.train).push_back(k);
    }
    return split;
}

void write_log_header(std::ostream& out) {
    out << "epoch,mean_loss,psnr,ssim,mae,seconds\n";
}

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void write_log_row(std::ostream& out, const EpochLog& row) {
    out << row.epoch << ',' << fmt(row.mean_loss) << ',';
    if (row.evaluated) {
        out << fmt(row.metrics.psnr) << ',' << fmt(row.metrics.ssim) << ',' << fmt(row.metrics.mae);
    } else {
        out << ",,";
    }
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", row.seconds);
    out << ',' << secs << '\n';
}

TrainState initial_state(const NetworkConfig& net, const TrainConfig& config) {
    Rng rng = derive_rng(config.seed, stream::kInit);
    TrainState state;
    state.params = build_network<float>(net, rng);
    state.adam = adam_init(state.params);
    return state;
}

namespace {

void load_batch(const PatchDataset& data, std::span<const std::size_t> indices, Tensor4<float>& z, Tensor4<float>& x) {
    const std::size_t ps = data.patch_size();
    z = Tensor4<float>(indices.size(), 1, ps, ps);
    x = Tensor4<float>(indices.size(), 1, ps, ps);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        auto noisy = data.noisy(indices[b]);
        auto clean = data.clean(indices[b]);
        std::copy(noisy.begin(), noisy.end(), z.sample(b).begin());
        std::copy(clean.begin(), clean.end(), x.sample(b).begin());
    }
}

}  // namespace

MetricsReport evaluate_patches(const PatchDataset& data, std::span<const std::size_t> indices,
                               const NetworkParams<float>& params, const NetworkConfig& net, std::size_t batch) {
    if (indices.empty()) throw ParameterError("evaluate_patches: no patches");
    const std::size_t ps = data.patch_size();
    MetricsReport sum{};
    Tensor4<float> z;
    Tensor4<float> x;
    for (std::size_t start = 0; start < indices.size(); start += batch) {
        const std::size_t n = std::min(batch, indices.size() - start);
        load_batch(data, indices.subspan(start, n), z, x);
        const Tensor4<float> v = network_infer(z, params, net);
        for (std::size_t b = 0; b < n; ++b) {
            FringeImage clean(ps, ps);
            FringeImage denoised(ps, ps);
            auto zs = z.sample(b);
            auto vs = v.sample(b);
            auto xs = x.sample(b);
            for (std::size_t i = 0; i < zs.size(); ++i) {
                clean.data()[i] = xs[i];
                denoised.data()[i] = static_cast<double>(zs[i]) - static_cast<double>(vs[i]);
            }
            const MetricsReport r = compare(clean, denoised);
            sum.psnr += r.psnr;
            sum.ssim += r.ssim;
            sum.mae += r.mae;
        }
    }
    const double n = static_cast<double>(indices.size());
    return {sum.psnr / n, sum.ssim / n, sum.mae / n};
}

std::string checkpoint_path(const std::string& dir, std::size_t epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04zu.fpdc", epoch);
    return (std::filesystem::path(dir) / name).string();
}

TrainResult train(const PatchDataset& data, const NetworkConfig& net, const TrainConfig& config,
                  const TrainState* resume, const std::function<void(const EpochLog&)>& on_epoch) {
    net.validate();
    config.validate();
    if (data.size() == 0) throw ParameterError("train: dataset is empty");
    if (data.patch_size() < net.kernel) throw ParameterError("train: patches are smaller than the kernel");

    const DataSplit split = split_by_source(data, config.heldout_fraction, config.seed);
    const std::size_t K = split.train.size();
    const std::size_t P = config.batch_size;
    if (K < P) {
        throw ParameterError("train: " + std::to_string(K) + " training patches is fewer than one batch of " +
                             std::to_string(P));
    }
    const std::size_t Q = K / P;
    std::vector<std::size_t> eval_indices = split.heldout;
    if (config.max_eval_patches > 0 && eval_indices.size() > config.max_eval_patches) {
        eval_indices.resize(config.max_eval_patches);
    }

    TrainResult result;
    if (resume) {
        check_layout(resume->params, net);
        result.state = *resume;
    } else {
        result.state = initial_state(net, config);
    }
    if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);

    Tensor4<float> z;
    Tensor4<float> x;
    for (std::size_t epoch = result.state.epoch + 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> order = split.train;
        Rng rng = derive_rng(config.seed, stream::kShuffle, epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        for (std::size_t q = 0; q < Q; ++q) {
            load_batch(data, std::span<const std::size_t>(order).subspan(q * P, P), z, x);
            auto fwd = network_forward(z, result.state.params, net, nn::Mode::Train);
            auto loss = euclid_loss(fwd.residual, z, x);
            if (!std::isfinite(loss.loss)) throw ContractError("train: loss became non-finite at epoch " + std::to_string(epoch));
            loss_sum += loss.loss;
            const auto grads = network_backward(fwd.cache, loss.grad, result.state.params, net);
            adam_step(result.state.params, grads, result.state.adam, config);
        }
        result.state.epoch = epoch;

        EpochLog row;
        row.epoch = epoch;
        row.mean_loss = loss_sum / static_cast<double>(Q);
        const bool eval_epoch = epoch % config.eval_every == 0 || epoch == config.epochs;
        if (eval_epoch) {
            if (!eval_indices.empty()) {
                row.evaluated = true;
                row.metrics = evaluate_patches(data, eval_indices, result.state.params, net, P);
            }
            if (!config.checkpoint_dir.empty()) {
                Checkpoint ckpt{net, config, epoch, result.state.params, result.state.adam};
                save_checkpoint(ckpt, checkpoint_path(config.checkpoint_dir, epoch));
            }
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(row);
        if (on_epoch) on_epoch(row);
    }
    return result;
}

template LossResult<float> euclid_loss(const Tensor4<float>&, const Tensor4<float>&, const Tensor4<float>&);
template LossResult<double> euclid_loss(const Tensor4<double>&, const Tensor4<double>&, const Tensor4<double>&);
template AdamState<float> adam_init(const NetworkParams<float>&);
template AdamState<double> adam_init(const NetworkParams<double>&);
template void adam_step(NetworkParams<float>&, const NetworkParams<float>&, AdamState<float>&, const TrainConfig&);
template void adam_step(NetworkParams<double>&, const NetworkParams<double>&, AdamState<double>&, const TrainConfig&);

}  // namespace fpd
