#include "fpd/checkpoint.h"

#include "fpd/binary_io.h"
#include "fpd/error.h"

namespace fpd {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'D', 'C'};

struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float>* data;
};

std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

// Directory order: network tensors, then adam.m.*, then adam.v.* for the learnable ones.
std::vector<Entry> directory(Checkpoint& ckpt) {
    std::vector<Entry> out;
    for_each_tensor(ckpt.params, [&](const TensorInfo& info, std::vector<float>& data) {
        out.push_back({info.name, info.shape, &data});
    });
    for_each_tensor(ckpt.adam.m, [&](const TensorInfo& info, std::vector<float>& data) {
        if (info.learnable) out.push_back({"adam.m." + info.name, info.shape, &data});
    });
    for_each_tensor(ckpt.adam.v, [&](const TensorInfo& info, std::vector<float>& data) {
        if (info.learnable) out.push_back({"adam.v." + info.name, info.shape, &data});
    });
    return out;
}

nlohmann::json train_header(const TrainConfig& config) {
    nlohmann::json doc = to_json(config);
    doc.erase("epochs");
    return doc;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& source) {
    check_layout(source.params, source.network);
    check_layout(source.adam.m, source.network);
    check_layout(source.adam.v, source.network);
    Checkpoint ckpt = source;
    const auto dir = directory(ckpt);

    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& e : dir) {
        tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
        offset += e.data->size() * 4;
    }
    const nlohmann::json header = {{"network", to_json(ckpt.network)},
                                   {"train", train_header(ckpt.train)},
                                   {"train_digest", train_config_digest(ckpt.train)},
                                   {"epoch", ckpt.epoch},
                                   {"seed", ckpt.train.seed},
                                   {"adam_step", ckpt.adam.step},
                                   {"payload_bytes", offset},
                                   {"tensors", tensors}};
    const std::string text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(12 + text.size() + offset);
    binio::put_bytes(out, std::string_view(kMagic, 4));
    binio::put_u32(out, kCheckpointVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(text.size()));
    binio::put_bytes(out, text);
    for (const auto& e : dir) {
        for (float v : *e.data) binio::put_f32(out, v);
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    using K = CheckpointErrorKind;
    if (bytes.size() < 4) throw CheckpointError(K::Truncated, "file shorter than the magic");
    if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw CheckpointError(K::BadMagic, "not an FPDC checkpoint");
    if (bytes.size() < 12) throw CheckpointError(K::Truncated, "incomplete preamble");
    const std::uint32_t version = binio::get_u32(bytes.data() + 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError(K::UnsupportedVersion, "format version " + std::to_string(version));
    }
    const std::size_t header_len = binio::get_u32(bytes.data() + 8);
    if (bytes.size() < 12 + header_len) throw CheckpointError(K::Truncated, "incomplete header");

    Checkpoint ckpt;
    nlohmann::json header;
    std::vector<nlohmann::json> listed;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
        ckpt.network = network_config_from_json(header.at("network"));
        ckpt.train = train_config_from_json(header.at("train"));
        ckpt.train.seed = header.at("seed").get<std::uint64_t>();
        ckpt.epoch = header.at("epoch").get<std::size_t>();
        ckpt.adam.step = header.at("adam_step").get<std::uint64_t>();
        listed = header.at("tensors").get<std::vector<nlohmann::json>>();
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(K::Malformed, std::string("header: ") + e.what());
    }
    if (header.value("train_digest", std::string()) != train_config_digest(ckpt.train)) {
        throw CheckpointError(K::Malformed, "train digest does not match the stored train settings");
    }

    ckpt.params = zero_network<float>(ckpt.network);
    ckpt.adam.m = zeros_like(ckpt.params);
    ckpt.adam.v = zeros_like(ckpt.params);
    const auto dir = directory(ckpt);
    if (listed.size() != dir.size()) throw CheckpointError(K::Malformed, "tensor directory does not match the network");

    std::size_t offset = 0;
    for (std::size_t k = 0; k < dir.size(); ++k) {
        try {
            if (listed[k].at("name").get<std::string>() != dir[k].name ||
                listed[k].at("shape").get<std::vector<std::size_t>>() != dir[k].shape ||
                listed[k].at("offset").get<std::size_t>() != offset) {
                throw CheckpointError(K::Malformed, "tensor directory entry " + std::to_string(k) + " is inconsistent");
            }
        } catch (const CheckpointError&) {
            throw;
        } catch (const std::exception& e) {
            throw CheckpointError(K::Malformed, std::string("tensor directory: ") + e.what());
        }
        offset += element_count(dir[k].shape) * 4;
    }
    const std::size_t payload = bytes.size() - 12 - header_len;
    if (payload < offset) {
        throw CheckpointError(K::Truncated, "payload has " + std::to_string(payload) + " bytes, expected " + std::to_string(offset));
    }
    if (payload > offset) throw CheckpointError(K::Malformed, "trailing bytes after the payload");

    const std::uint8_t* p = bytes.data() + 12 + header_len;
    for (const auto& e : dir) {
        for (auto& v : *e.data) {
            v = binio::get_f32(p);
            p += 4;
        }
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const auto bytes = encode_checkpoint(ckpt);
    binio::write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
    return decode_checkpoint(binio::read_file(path));
}

Checkpoint load_checkpoint(const std::string& path, const NetworkConfig& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    if (!(ckpt.network == expected)) {
        throw CheckpointError(CheckpointErrorKind::ArchitectureMismatch,
                              "checkpoint network " + to_json(ckpt.network).dump() + " differs from " +
                                  to_json(expected).dump());
    }
    return ckpt;
}

TrainState to_train_state(const Checkpoint& ckpt) {
    return {ckpt.params, ckpt.adam, ckpt.epoch};
}

}  // namespace fpd
