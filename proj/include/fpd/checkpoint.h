#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpd/network.h"
#include "fpd/trainer.h"

namespace fpd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    NetworkConfig network;
    TrainConfig train;
    std::size_t epoch = 0;
    NetworkParams<float> params;
    AdamState<float> adam;
};

// "FPDC", u32 version, u32 header length, JSON header, then every tensor as
// little-endian f32 in directory order: network tensors, then ADAM first and
// second moments of the learnable tensors.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
// Throws CheckpointError(ArchitectureMismatch) unless the stored network
// configuration equals `expected`.
Checkpoint load_checkpoint(const std::string& path, const NetworkConfig& expected);

TrainState to_train_state(const Checkpoint& ckpt);

}  // namespace fpd
