#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fpd/fringe_image.h"

namespace fpd {

enum class Augmentation : std::uint8_t { None = 0, HFlip = 1, Rot90 = 2, Rot180 = 3, Rot270 = 4 };

const char* to_string(Augmentation aug);
Augmentation augmentation_from_string(const std::string& name);

struct PatchProvenance {
    std::uint32_t source_id = 0;
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    Augmentation augmentation = Augmentation::None;

    bool operator==(const PatchProvenance&) const = default;
};

struct ImagePair {
    FringeImage clean;
    FringeImage noisy;
};

struct DatasetOptions {
    std::size_t patch_size = 80;
    std::size_t stride = 16;
    std::vector<Augmentation> augmentations;
    // false: every grid patch is emitted once plainly and once per augmentation.
    // true: every grid patch is emitted once, transformed by an augmentation
    // (or none) picked from the seeded generator.
    bool augment_in_place = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ImageDims {
    std::size_t width = 0;
    std::size_t height = 0;
};

// Grid offsets 0, stride, 2*stride, ... not exceeding extent - patch.
std::vector<std::size_t> grid_offsets(std::size_t extent, std::size_t patch, std::size_t stride);

// Provenance of every patch, without materializing pixels. Throws
// ParameterError naming the first image smaller than the patch.
std::vector<PatchProvenance> plan_patches(std::span<const ImageDims> corpus, const DatasetOptions& options);

// Aligned clean/noisy patches in float storage, patch-major.
class PatchDataset {
public:
    PatchDataset() = default;
    PatchDataset(std::size_t patch_size, std::size_t stride, std::vector<PatchProvenance> records,
                 std::vector<float> clean, std::vector<float> noisy);

    std::size_t patch_size() const noexcept { return patch_size_; }
    std::size_t stride() const noexcept { return stride_; }
    std::size_t size() const noexcept { return records_.size(); }
    std::size_t pixels_per_patch() const noexcept { return patch_size_ * patch_size_; }

    const std::vector<PatchProvenance>& records() const noexcept { return records_; }
    std::span<const float> clean(std::size_t k) const;
    std::span<const float> noisy(std::size_t k) const;

    // Subset in the given order.
    PatchDataset select(std::span<const std::size_t> indices) const;

private:
    std::size_t patch_size_ = 0;
    std::size_t stride_ = 0;
    std::vector<PatchProvenance> records_;
    std::vector<float> clean_;
    std::vector<float> noisy_;
};

// Copies the window at (row, col) and applies the augmentation.
void extract_patch(const FringeImage& img, std::size_t row, std::size_t col, std::size_t size, Augmentation aug,
                   std::span<float> out);

PatchDataset build_dataset(std::span<const ImagePair> corpus, const DatasetOptions& options);

nlohmann::json to_json(const DatasetOptions& options);
DatasetOptions dataset_options_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PatchProvenance& p);

}  // namespace fpd
