#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "fpd/dataset.h"
#include "fpd/network.h"
#include "fpd/quality.h"

namespace fpd {

struct TrainConfig {
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::size_t epochs = 35;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    // Held-out metrics and a checkpoint every `eval_every` epochs and after the last one.
    std::size_t eval_every = 1;
    // Share of source images whose patches are held out.
    double heldout_fraction = 0.1;
    // 0 evaluates every held-out patch.
    std::size_t max_eval_patches = 0;
    // Empty disables checkpoint files.
    std::string checkpoint_dir;

    void validate() const;
};

// Seed and checkpoint_dir are not part of the document.
nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

// Hex digest of the optimization settings (batch size, learning rate, ADAM
// constants, evaluation split). Epoch count and paths are excluded so a
// resumed run keeps the digest of the run it continues.
std::string train_config_digest(const TrainConfig& config);

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor4<T> grad; // d loss / d v_pred
};

// loss = 1/(2K) sum_k ||v_k - (z_k - x_k)||^2, grad = (v - (z - x)) / K.
template <typename T>
LossResult<T> euclid_loss(const Tensor4<T>& v_pred, const Tensor4<T>& z, const Tensor4<T>& x);

template <typename T>
struct AdamState {
    NetworkParams<T> m;
    NetworkParams<T> v;
    std::uint64_t step = 0;
};

template <typename T>
AdamState<T> adam_init(const NetworkParams<T>& params);

// Bias-corrected ADAM on every learnable tensor. BN running statistics are
// left alone.
template <typename T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads, AdamState<T>& state, const TrainConfig& config);

struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> heldout;
};

// Partitions patch indices by source image.
DataSplit split_by_source(const PatchDataset& data, double heldout_fraction, std::uint64_t seed);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    bool evaluated = false;
    MetricsReport metrics;
    double seconds = 0.0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const EpochLog& row);

struct TrainState {
    NetworkParams<float> params;
    AdamState<float> adam;
    std::size_t epoch = 0; // completed epochs
};

struct TrainResult {
    TrainState state;
    std::vector<EpochLog> log;
};

// Fresh network from the kInit stream of config.seed.
TrainState initial_state(const NetworkConfig& net, const TrainConfig& config);

// Mean metrics of the denoised patches against their clean targets.
MetricsReport evaluate_patches(const PatchDataset& data, std::span<const std::size_t> indices,
                               const NetworkParams<float>& params, const NetworkConfig& net, std::size_t batch);

// Runs epochs state.epoch + 1 .. config.epochs. Throws ParameterError when
// the training split holds fewer patches than one batch.
TrainResult train(const PatchDataset& data, const NetworkConfig& net, const TrainConfig& config,
                  const TrainState* resume = nullptr, const std::function<void(const EpochLog&)>& on_epoch = {});

// Path of the checkpoint written after `epoch`.
std::string checkpoint_path(const std::string& dir, std::size_t epoch);

}  // namespace fpd
