// SPDX-License-Identifier: Apache-2.0
#include "kbitq/safetensors.hpp"

#include "kbitq/error.hpp"
#include "kbitq/half.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <fstream>

namespace kbitq {
namespace {

std::uint64_t dtype_width(const std::string& dtype) {
    static const std::map<std::string, std::uint64_t> widths = {
        {"BOOL", 1}, {"U8", 1},  {"I8", 1},  {"F8_E4M3", 1}, {"F8_E5M2", 1}, {"U16", 2}, {"I16", 2},
        {"F16", 2},  {"BF16", 2}, {"U32", 4}, {"I32", 4},     {"F32", 4},     {"U64", 8}, {"I64", 8},
        {"F64", 8},
    };
    const auto it = widths.find(dtype);
    if (it == widths.end()) {
        throw Error(Errc::Parse, "unknown dtype '" + dtype + "' in safetensors header");
    }
    return it->second;
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

TensorContainer TensorContainer::open(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw Error(Errc::Io, "cannot open '" + path.string() + "'");
    }
    const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
    unsigned char len_bytes[8];
    if (file_size < 8 || !file.read(reinterpret_cast<char*>(len_bytes), 8)) {
        throw Error(Errc::Length, "'" + path.string() + "' is too short for a safetensors header");
    }
    const std::uint64_t header_len = read_u64_le(len_bytes);
    if (header_len > file_size - 8) {
        throw Error(Errc::Length, "safetensors header length exceeds the file size");
    }
    std::string header(header_len, '\0');
    file.read(header.data(), static_cast<std::streamsize>(header_len));

    nlohmann::json json;
    try {
        json = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::Parse, std::string("malformed safetensors header: ") + e.what());
    }
    if (!json.is_object()) {
        throw Error(Errc::Parse, "safetensors header is not a JSON object");
    }

    TensorContainer c;
    c.path_ = path;
    c.data_start_ = 8 + header_len;
    const std::uint64_t data_size = file_size - c.data_start_;
    try {
        for (const auto& [key, value] : json.items()) {
            if (key == "__metadata__") {
                for (const auto& [mk, mv] : value.items()) c.metadata_[mk] = mv.get<std::string>();
                continue;
            }
            ContainerEntry e;
            e.name = key;
            e.dtype = value.at("dtype").get<std::string>();
            e.shape = value.at("shape").get<Shape>();
            const auto offsets = value.at("data_offsets").get<std::vector<std::uint64_t>>();
            if (offsets.size() != 2 || offsets[0] > offsets[1]) {
                throw Error(Errc::Parse, "tensor '" + key + "' has invalid data_offsets");
            }
            e.begin = offsets[0];
            e.end = offsets[1];
            if (e.end - e.begin != element_count(e.shape) * dtype_width(e.dtype)) {
                throw Error(Errc::Parse, "tensor '" + key + "' byte range does not match shape and dtype");
            }
            if (e.end > data_size) {
                throw Error(Errc::Length, "tensor '" + key + "' extends past the end of the file");
            }
            c.entries_.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::Parse, std::string("malformed safetensors entry: ") + e.what());
    }

    std::sort(c.entries_.begin(), c.entries_.end(), [](const ContainerEntry& a, const ContainerEntry& b) {
        return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
    });
    for (std::size_t i = 1; i < c.entries_.size(); ++i) {
        if (c.entries_[i].begin < c.entries_[i - 1].end) {
            throw Error(Errc::Parse, "tensors '" + c.entries_[i - 1].name + "' and '" + c.entries_[i].name +
                                         "' overlap");
        }
    }
    return c;
}

const ContainerEntry* TensorContainer::find(std::string_view name) const {
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
    return it == entries_.end() ? nullptr : &*it;
}

Tensor TensorContainer::read(std::string_view name) const {
    const ContainerEntry* e = find(name);
    if (e == nullptr) {
        throw Error(Errc::InvalidIndex, "no tensor named '" + std::string(name) + "'");
    }
    if (!e->is_float()) {
        throw Error(Errc::Format, "tensor '" + e->name + "' has non-float dtype " + e->dtype);
    }
    std::ifstream file(path_, std::ios::binary);
    std::vector<unsigned char> raw(e->end - e->begin);
    file.seekg(static_cast<std::streamoff>(data_start_ + e->begin));
    if (!file || !file.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw Error(Errc::Length, "tensor '" + e->name + "' data is truncated");
    }

    Tensor t{e->shape, std::vector<float>(element_count(e->shape))};
    const unsigned char* p = raw.data();
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        if (e->dtype == "F32") {
            const std::uint32_t bits = static_cast<std::uint32_t>(p[4 * i]) | (static_cast<std::uint32_t>(p[4 * i + 1]) << 8) |
                                       (static_cast<std::uint32_t>(p[4 * i + 2]) << 16) |
                                       (static_cast<std::uint32_t>(p[4 * i + 3]) << 24);
            t.values[i] = std::bit_cast<float>(bits);
        } else {
            const auto bits = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
            t.values[i] = e->dtype == "F16" ? Half{bits}.to_float()
                                            : std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
        }
    }
    return t;
}

void write_container(const std::filesystem::path& path, std::span<const NamedTensor> tensors, StorageDtype dtype,
                     const std::map<std::string, std::string>& metadata) {
    const std::uint64_t width = dtype == StorageDtype::F32 ? 4 : 2;
    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    if (!metadata.empty()) header["__metadata__"] = metadata;
    std::uint64_t offset = 0;
    for (const auto& nt : tensors) {
        if (element_count(nt.tensor.shape) != nt.tensor.values.size()) {
            throw Error(Errc::Dimension, "tensor '" + nt.name + "' shape does not match its data");
        }
        const std::uint64_t bytes = nt.tensor.values.size() * width;
        header[nt.name] = {{"dtype", dtype == StorageDtype::F32 ? "F32" : "F16"},
                           {"shape", nt.tensor.shape},
                           {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    std::string text = header.dump();
    text.append((8 - text.size() % 8) % 8, ' ');

    std::vector<unsigned char> out;
    out.reserve(8 + text.size() + offset);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(static_cast<std::uint64_t>(text.size()) >> (8 * i)));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& nt : tensors) {
        for (float v : nt.tensor.values) {
            if (dtype == StorageDtype::F32) {
                const auto bits = std::bit_cast<std::uint32_t>(v);
                for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
            } else {
                const auto bits = Half::from_float(v).bits;
                out.push_back(static_cast<unsigned char>(bits));
                out.push_back(static_cast<unsigned char>(bits >> 8));
            }
        }
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file || !file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()))) {
        throw Error(Errc::Io, "cannot write '" + path.string() + "'");
    }
}

}  // namespace kbitq
