#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fpd/dataset.h"

namespace fpd {

inline constexpr std::uint32_t kPackedDatasetVersion = 1;

// "FPDS", u32 version, u32 patch size, u32 stride, u32 patch count, then one
// provenance row per patch (u32 source, row, col, augmentation), then per
// patch the clean and the noisy patch, each as a complete FPD1 image.
void write_packed_dataset(const PatchDataset& data, const std::string& path);

// Same bytes as write_packed_dataset(build_dataset(...)), but loads one
// source pair at a time through `load`. `records` must come from plan_patches.
void write_packed_dataset_streaming(const std::string& path, std::size_t patch_size, std::size_t stride,
                                    std::span<const PatchProvenance> records,
                                    const std::function<ImagePair(std::size_t source_id)>& load);

PatchDataset read_packed_dataset(const std::string& path);

}  // namespace fpd
