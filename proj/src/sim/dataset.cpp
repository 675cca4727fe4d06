#include "fpd/dataset.h"

#include <algorithm>
#include <string>

#include "fpd/error.h"
#include "fpd/json_util.h"
#include "fpd/rng.h"

namespace fpd {

const char* to_string(Augmentation aug) {
    switch (aug) {
        case Augmentation::None: return "none";
        case Augmentation::HFlip: return "hflip";
        case Augmentation::Rot90: return "rot90";
        case Augmentation::Rot180: return "rot180";
        case Augmentation::Rot270: return "rot270";
    }
    return "?";
}

Augmentation augmentation_from_string(const std::string& name) {
    for (auto aug : {Augmentation::None, Augmentation::HFlip, Augmentation::Rot90, Augmentation::Rot180,
                     Augmentation::Rot270}) {
        if (name == to_string(aug)) return aug;
    }
    throw DataError("unknown augmentation '" + name + "'");
}

void DatasetOptions::validate() const {
    if (patch_size == 0) throw ParameterError("dataset: patch size must be positive");
    if (stride == 0) throw ParameterError("dataset: stride must be positive");
    for (auto aug : augmentations) {
        if (aug == Augmentation::None) throw ParameterError("dataset: 'none' is not an augmentation");
    }
}

std::vector<std::size_t> grid_offsets(std::size_t extent, std::size_t patch, std::size_t stride) {
    std::vector<std::size_t> offsets;
    if (extent < patch || stride == 0) return offsets;
    for (std::size_t o = 0; o + patch <= extent; o += stride) offsets.push_back(o);
    return offsets;
}

std::vector<PatchProvenance> plan_patches(std::span<const ImageDims> corpus, const DatasetOptions& options) {
    options.validate();
    std::vector<PatchProvenance> records;
    Rng rng = derive_rng(options.seed, stream::kAugment);
    const std::size_t variants = options.augmentations.size() + 1;
    for (std::size_t id = 0; id < corpus.size(); ++id) {
        const auto& dims = corpus[id];
        if (dims.width < options.patch_size || dims.height < options.patch_size) {
            throw ParameterError("dataset: image " + std::to_string(id) + " (" + std::to_string(dims.width) + "x" +
                                 std::to_string(dims.height) + ") is smaller than the " +
                                 std::to_string(options.patch_size) + "-pixel patch");
        }
        const auto rows = grid_offsets(dims.height, options.patch_size, options.stride);
        const auto cols = grid_offsets(dims.width, options.patch_size, options.stride);
        for (std::size_t r : rows) {
            for (std::size_t c : cols) {
                PatchProvenance p{static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(r),
                                  static_cast<std::uint32_t>(c), Augmentation::None};
                if (options.augment_in_place) {
                    const auto pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(variants));
                    if (pick > 0 && pick < variants) p.augmentation = options.augmentations[pick - 1];
                    records.push_back(p);
                } else {
                    records.push_back(p);
                    for (auto aug : options.augmentations) {
                        p.augmentation = aug;
                        records.push_back(p);
                    }
                }
            }
        }
    }
    return records;
}

PatchDataset::PatchDataset(std::size_t patch_size, std::size_t stride, std::vector<PatchProvenance> records,
                           std::vector<float> clean, std::vector<float> noisy)
    : patch_size_(patch_size), stride_(stride), records_(std::move(records)), clean_(std::move(clean)),
      noisy_(std::move(noisy)) {
    const std::size_t expected = records_.size() * pixels_per_patch();
    if (clean_.size() != expected || noisy_.size() != expected) {
        throw ShapeError("PatchDataset: payload does not match " + std::to_string(records_.size()) + " patches of " +
                         std::to_string(patch_size_) + "x" + std::to_string(patch_size_));
    }
}

std::span<const float> PatchDataset::clean(std::size_t k) const {
    return std::span<const float>(clean_).subspan(k * pixels_per_patch(), pixels_per_patch());
}

std::span<const float> PatchDataset::noisy(std::size_t k) const {
    return std::span<const float>(noisy_).subspan(k * pixels_per_patch(), pixels_per_patch());
}

PatchDataset PatchDataset::select(std::span<const std::size_t> indices) const {
    std::vector<PatchProvenance> records;
    std::vector<float> clean;
    std::vector<float> noisy;
    records.reserve(indices.size());
    clean.reserve(indices.size() * pixels_per_patch());
    noisy.reserve(indices.size() * pixels_per_patch());
    for (std::size_t k : indices) {
        if (k >= size()) throw ShapeError("PatchDataset::select: index out of range");
        records.push_back(records_[k]);
        auto c = this->clean(k);
        auto n = this->noisy(k);
        clean.insert(clean.end(), c.begin(), c.end());
        noisy.insert(noisy.end(), n.begin(), n.end());
    }
    return PatchDataset(patch_size_, stride_, std::move(records), std::move(clean), std::move(noisy));
}

void extract_patch(const FringeImage& img, std::size_t row, std::size_t col, std::size_t size, Augmentation aug,
                   std::span<float> out) {
    if (row + size > img.height() || col + size > img.width()) throw ShapeError("extract_patch: window out of bounds");
    if (out.size() != size * size) throw ShapeError("extract_patch: output buffer size");
    const std::size_t last = size - 1;
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            std::size_t sy = y;
            std::size_t sx = x;
            switch (aug) {
                case Augmentation::None: break;
                case Augmentation::HFlip: sx = last - x; break;
                case Augmentation::Rot90: sy = x; sx = last - y; break;
                case Augmentation::Rot180: sy = last - y; sx = last - x; break;
                case Augmentation::Rot270: sy = last - x; sx = y; break;
            }
            out[y * size + x] = static_cast<float>(img.at(row + sy, col + sx));
        }
    }
}

PatchDataset build_dataset(std::span<const ImagePair> corpus, const DatasetOptions& options) {
    std::vector<ImageDims> dims;
    dims.reserve(corpus.size());
    for (std::size_t id = 0; id < corpus.size(); ++id) {
        const auto& pair = corpus[id];
        if (pair.clean.width() != pair.noisy.width() || pair.clean.height() != pair.noisy.height()) {
            throw ShapeError("dataset: clean/noisy size mismatch in image " + std::to_string(id));
        }
        dims.push_back({pair.clean.width(), pair.clean.height()});
    }
    auto records = plan_patches(dims, options);
    const std::size_t n = options.patch_size * options.patch_size;
    std::vector<float> clean(records.size() * n);
    std::vector<float> noisy(records.size() * n);
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& p = records[k];
        const auto& pair = corpus[p.source_id];
        extract_patch(pair.clean, p.row, p.col, options.patch_size, p.augmentation,
                      std::span<float>(clean).subspan(k * n, n));
        extract_patch(pair.noisy, p.row, p.col, options.patch_size, p.augmentation,
                      std::span<float>(noisy).subspan(k * n, n));
    }
    return PatchDataset(options.patch_size, options.stride, std::move(records), std::move(clean), std::move(noisy));
}

using nlohmann::json;

json to_json(const DatasetOptions& o) {
    json augs = json::array();
    for (auto a : o.augmentations) augs.push_back(to_string(a));
    return {{"patch", o.patch_size},
            {"stride", o.stride},
            {"augmentations", augs},
            {"augment_in_place", o.augment_in_place}};
}

DatasetOptions dataset_options_from_json(const json& doc) {
    using namespace json_util;
    require_object(doc, "dataset");
    reject_unknown_keys(doc, {"patch", "stride", "augmentations", "augment_in_place"}, "dataset");
    DatasetOptions o;
    o.patch_size = get_uint(doc, "patch", o.patch_size);
    o.stride = get_uint(doc, "stride", o.stride);
    o.augment_in_place = get_bool(doc, "augment_in_place", o.augment_in_place);
    if (doc.contains("augmentations")) {
        if (!doc.at("augmentations").is_array()) throw DataError("dataset: 'augmentations' must be an array");
        for (const auto& a : doc.at("augmentations")) {
            if (!a.is_string()) throw DataError("dataset: augmentation names must be strings");
            o.augmentations.push_back(augmentation_from_string(a.get<std::string>()));
        }
    }
    o.validate();
    return o;
}

json to_json(const PatchProvenance& p) {
    return {{"source", p.source_id}, {"row", p.row}, {"col", p.col}, {"augmentation", to_string(p.augmentation)}};
}

}  // namespace fpd
