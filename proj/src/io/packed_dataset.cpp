#include "fpd/packed_dataset.h"

#include <filesystem>
#include <fstream>

#include "fpd/binary_io.h"
#include "fpd/error.h"

namespace fpd {

namespace {

std::vector<std::uint8_t> header_bytes(std::size_t patch_size, std::size_t stride, std::span<const PatchProvenance> records) {
    std::vector<std::uint8_t> out;
    binio::put_bytes(out, "FPDS");
    binio::put_u32(out, kPackedDatasetVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(patch_size));
    binio::put_u32(out, static_cast<std::uint32_t>(stride));
    binio::put_u32(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        binio::put_u32(out, r.source_id);
        binio::put_u32(out, r.row);
        binio::put_u32(out, r.col);
        binio::put_u32(out, static_cast<std::uint32_t>(r.augmentation));
    }
    return out;
}

void append_patch(std::vector<std::uint8_t>& out, std::size_t size, std::span<const float> values) {
    binio::put_bytes(out, "FPD1");
    binio::put_u32(out, static_cast<std::uint32_t>(size));
    binio::put_u32(out, static_cast<std::uint32_t>(size));
    for (float v : values) binio::put_f32(out, v);
}

class AtomicFile {
public:
    explicit AtomicFile(std::string path) : path_(std::move(path)), tmp_(path_ + ".tmp"), out_(tmp_, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error("cannot open '" + tmp_ + "' for writing");
    }
    void write(const std::vector<std::uint8_t>& bytes) {
        out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out_) throw Error("write to '" + tmp_ + "' failed");
    }
    void commit() {
        out_.close();
        std::filesystem::rename(tmp_, path_);
    }

private:
    std::string path_;
    std::string tmp_;
    std::ofstream out_;
};

}  // namespace

void write_packed_dataset(const PatchDataset& data, const std::string& path) {
    AtomicFile file(path);
    file.write(header_bytes(data.patch_size(), data.stride(), data.records()));
    std::vector<std::uint8_t> buf;
    for (std::size_t k = 0; k < data.size(); ++k) {
        buf.clear();
        append_patch(buf, data.patch_size(), data.clean(k));
        append_patch(buf, data.patch_size(), data.noisy(k));
        file.write(buf);
    }
    file.commit();
}

void write_packed_dataset_streaming(const std::string& path, std::size_t patch_size, std::size_t stride,
                                    std::span<const PatchProvenance> records,
                                    const std::function<ImagePair(std::size_t source_id)>& load) {
    AtomicFile file(path);
    file.write(header_bytes(patch_size, stride, records));
    const std::size_t n = patch_size * patch_size;
    std::vector<float> clean(n);
    std::vector<float> noisy(n);
    std::vector<std::uint8_t> buf;
    ImagePair pair;
    std::size_t loaded = static_cast<std::size_t>(-1);
    for (const auto& r : records) {
        if (r.source_id != loaded) {
            pair = load(r.source_id);
            require_same_dims(pair.clean, pair.noisy, "packed dataset source");
            loaded = r.source_id;
        }
        extract_patch(pair.clean, r.row, r.col, patch_size, r.augmentation, clean);
        extract_patch(pair.noisy, r.row, r.col, patch_size, r.augmentation, noisy);
        buf.clear();
        append_patch(buf, patch_size, clean);
        append_patch(buf, patch_size, noisy);
        file.write(buf);
    }
    file.commit();
}

PatchDataset read_packed_dataset(const std::string& path) {
    const auto b = binio::read_file(path);
    if (b.size() < 4 || !std::equal(b.begin(), b.begin() + 4, "FPDS")) throw ParseError(ParseErrorKind::BadMagic, path + ": not a packed dataset");
    if (b.size() < 20) throw ParseError(ParseErrorKind::Truncated, path + ": incomplete header");
    const std::uint32_t version = binio::get_u32(b.data() + 4);
    if (version != kPackedDatasetVersion) {
        throw ParseError(ParseErrorKind::BadHeader, path + ": unsupported version " + std::to_string(version));
    }
    const std::size_t patch = binio::get_u32(b.data() + 8);
    const std::size_t stride = binio::get_u32(b.data() + 12);
    const std::size_t count = binio::get_u32(b.data() + 16);
    if (patch == 0) throw ParseError(ParseErrorKind::BadHeader, path + ": zero patch size");
    const std::size_t n = patch * patch;
    const std::size_t table = 20 + 16 * count;
    const std::size_t patch_bytes = 12 + 4 * n;
    if (b.size() < table + 2 * patch_bytes * count) {
        throw ParseError(ParseErrorKind::Truncated, path + ": expected " + std::to_string(count) + " patch pairs");
    }

    std::vector<PatchProvenance> records(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::uint8_t* p = b.data() + 20 + 16 * k;
        const std::uint32_t aug = binio::get_u32(p + 12);
        if (aug > static_cast<std::uint32_t>(Augmentation::Rot270)) {
            throw ParseError(ParseErrorKind::BadHeader, path + ": unknown augmentation code " + std::to_string(aug));
        }
        records[k] = {binio::get_u32(p), binio::get_u32(p + 4), binio::get_u32(p + 8), static_cast<Augmentation>(aug)};
    }
    std::vector<float> clean(count * n);
    std::vector<float> noisy(count * n);
    const std::uint8_t* p = b.data() + table;
    auto read_patch = [&](float* out) {
        if (!std::equal(p, p + 4, "FPD1")) throw ParseError(ParseErrorKind::BadMagic, path + ": patch is not FPD1");
        if (binio::get_u32(p + 4) != patch || binio::get_u32(p + 8) != patch) {
            throw ParseError(ParseErrorKind::BadHeader, path + ": patch dimensions differ from the header");
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = binio::get_f32(p + 12 + 4 * i);
        p += patch_bytes;
    };
    for (std::size_t k = 0; k < count; ++k) {
        read_patch(clean.data() + k * n);
        read_patch(noisy.data() + k * n);
    }
    return PatchDataset(patch, stride, std::move(records), std::move(clean), std::move(noisy));
}

}  // namespace fpd
