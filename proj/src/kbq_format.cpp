// SPDX-License-Identifier: Apache-2.0
#include "kbitq/kbq_format.hpp"

#include "kbitq/error.hpp"
#include "kbitq/kernels.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace kbitq {
namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kSections[] = {"indices", "absmax", "means", "outlier_dims", "outlier_values", "codebook"};

std::uint64_t align8(std::uint64_t n) { return (n + 7) & ~std::uint64_t{7}; }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> section_payload(const QuantizedTensor& q, std::string_view section) {
    std::vector<std::uint8_t> out;
    if (section == "indices") {
        out = q.indices;
    } else if (section == "absmax") {
        for (Half h : q.absmax) put_u16(out, h.bits);
    } else if (section == "means") {
        for (Half h : q.means) put_u16(out, h.bits);
    } else if (section == "outlier_dims") {
        for (std::uint32_t r : q.outlier_rows) put_u32(out, r);
    } else if (section == "outlier_values") {
        for (Half h : q.outlier_values) put_u16(out, h.bits);
    } else {
        for (float v : q.codebook_values) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Json dtype_json(const QuantConfig& c) {
    Json d = {{"kind", kind_name(c.kind)}, {"bits", c.bits}};
    if (c.kind == CodebookKind::Float) d["exponent_bits"] = c.resolved_exponent_bits();
    return d;
}

struct Header {
    Json manifest;
    std::uint64_t payload_offset = 0;
};

Header parse_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || !std::equal(kKbqMagic.begin(), kKbqMagic.end(), bytes.begin(),
                                        [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
        throw Error(Errc::Format, "not a KBQ1 file (bad magic)");
    }
    const std::uint64_t manifest_len = get_u32(bytes.data() + 4);
    if (8 + manifest_len > bytes.size()) {
        throw Error(Errc::CorruptData, "KBQ manifest length exceeds the file size");
    }
    Header h;
    try {
        h.manifest = Json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(manifest_len));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::CorruptData, std::string("KBQ manifest is not valid JSON: ") + e.what());
    }
    h.payload_offset = align8(8 + manifest_len);
    if (h.payload_offset > bytes.size()) {
        throw Error(Errc::CorruptData, "KBQ payload region is missing");
    }
    if (!h.manifest.is_object() || h.manifest.value("version", 0) != kKbqVersion || !h.manifest.contains("tensors")) {
        throw Error(Errc::Format, "unsupported KBQ manifest version");
    }
    return h;
}

}  // namespace

std::vector<std::uint8_t> encode_kbq(std::span<const QuantizedTensor> tensors) {
    Json manifest = {{"format", "KBQ1"}, {"version", kKbqVersion}, {"tensors", Json::array()}};
    std::vector<std::uint8_t> payload;
    for (const auto& q : tensors) {
        Json sections = Json::object();
        for (const char* name : kSections) {
            auto data = section_payload(q, name);
            sections[name] = {{"offset", payload.size()}, {"length", data.size()}};
            payload.insert(payload.end(), data.begin(), data.end());
            payload.resize(align8(payload.size()), 0);
        }
        Json entry = {{"name", q.name},
                      {"shape", q.shape},
                      {"dtype", dtype_json(q.config)},
                      {"block_size", q.config.block_size ? Json(*q.config.block_size) : Json(nullptr)},
                      {"centered", q.config.centered},
                      {"outlier_fraction", q.config.outlier_fraction},
                      {"quantized_count", q.quantized_count},
                      {"num_blocks", q.absmax.size()},
                      {"outlier_rows", q.outlier_rows.size()},
                      {"codebook_size", q.codebook_values.size()},
                      {"sections", std::move(sections)}};
        manifest["tensors"].push_back(std::move(entry));
    }

    const std::string text = manifest.dump();
    std::vector<std::uint8_t> out(kKbqMagic.begin(), kKbqMagic.end());
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.resize(align8(out.size()), 0);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

std::vector<QuantizedTensor> decode_kbq(std::span<const std::uint8_t> bytes) {
    const Header header = parse_header(bytes);
    const auto payload = bytes.subspan(header.payload_offset);
    std::vector<QuantizedTensor> out;
    try {
        for (const auto& entry : header.manifest.at("tensors")) {
            QuantizedTensor q;
            q.name = entry.at("name").get<std::string>();
            q.shape = entry.at("shape").get<Shape>();
            const auto& dtype = entry.at("dtype");
            q.config.kind = parse_kind(dtype.at("kind").get<std::string>());
            q.config.bits = dtype.at("bits").get<int>();
            if (q.config.kind == CodebookKind::Float) q.config.exponent_bits = dtype.at("exponent_bits").get<int>();
            if (!entry.at("block_size").is_null()) q.config.block_size = entry.at("block_size").get<std::uint64_t>();
            q.config.centered = entry.at("centered").get<bool>();
            q.config.outlier_fraction = entry.at("outlier_fraction").get<double>();
            q.config.validate();
            q.quantized_count = entry.at("quantized_count").get<std::uint64_t>();
            const auto num_blocks = entry.at("num_blocks").get<std::uint64_t>();
            const auto outlier_rows = entry.at("outlier_rows").get<std::uint64_t>();
            const auto codebook_size = entry.at("codebook_size").get<std::uint64_t>();

            const std::uint64_t total = element_count(q.shape);
            const std::uint64_t row_len = q.shape.empty() || q.shape[0] == 0 ? total : total / q.shape[0];
            const std::uint64_t expected_blocks = block_count(q.quantized_count, q.config.block_for(q.quantized_count));
            if (q.quantized_count + outlier_rows * row_len != total || num_blocks != expected_blocks ||
                (q.config.kind == CodebookKind::Quantile) != (codebook_size > 0)) {
                throw Error(Errc::CorruptData, "manifest entry '" + q.name + "' is internally inconsistent");
            }
            const std::uint64_t expected[] = {
                kernels::packed_size(q.quantized_count, q.config.bits),
                2 * num_blocks,
                q.config.centered ? 2 * num_blocks : 0,
                4 * outlier_rows,
                2 * outlier_rows * row_len,
                4 * codebook_size,
            };

            const auto& sections = entry.at("sections");
            std::span<const std::uint8_t> data[6];
            for (std::size_t s = 0; s < 6; ++s) {
                const auto& sec = sections.at(kSections[s]);
                const auto offset = sec.at("offset").get<std::uint64_t>();
                const auto length = sec.at("length").get<std::uint64_t>();
                if (length != expected[s] || offset % 8 != 0 || offset > payload.size() ||
                    length > payload.size() - offset) {
                    throw Error(Errc::CorruptData, std::string("section '") + kSections[s] + "' of '" + q.name +
                                                       "' does not match the manifest");
                }
                data[s] = payload.subspan(offset, length);
            }
            q.indices.assign(data[0].begin(), data[0].end());
            for (std::size_t i = 0; i < data[1].size(); i += 2) q.absmax.push_back(Half{get_u16(&data[1][i])});
            for (std::size_t i = 0; i < data[2].size(); i += 2) q.means.push_back(Half{get_u16(&data[2][i])});
            for (std::size_t i = 0; i < data[3].size(); i += 4) q.outlier_rows.push_back(get_u32(&data[3][i]));
            for (std::size_t i = 0; i < data[4].size(); i += 2) q.outlier_values.push_back(Half{get_u16(&data[4][i])});
            for (std::size_t i = 0; i < data[5].size(); i += 4) {
                q.codebook_values.push_back(std::bit_cast<float>(get_u32(&data[5][i])));
            }
            out.push_back(std::move(q));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::CorruptData, std::string("KBQ manifest is missing fields: ") + e.what());
    } catch (const Error& e) {
        if (e.is_data_format()) throw;
        throw Error(Errc::CorruptData, std::string("KBQ manifest holds an invalid config: ") + e.what());
    }
    return out;
}

void write_kbq(const std::filesystem::path& path, std::span<const QuantizedTensor> tensors) {
    const auto bytes = encode_kbq(tensors);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file ||
        !file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
        throw Error(Errc::Io, "cannot write '" + path.string() + "'");
    }
}

std::vector<QuantizedTensor> read_kbq(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw Error(Errc::Io, "cannot open '" + path.string() + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    return decode_kbq(bytes);
}

KbqSizes kbq_sizes(std::span<const std::uint8_t> bytes) {
    const Header header = parse_header(bytes);
    KbqSizes s;
    s.file_bytes = bytes.size();
    s.payload_offset = header.payload_offset;
    for (const auto& entry : header.manifest.at("tensors")) {
        for (const char* name : kSections) {
            const auto length = entry.at("sections").at(name).at("length").get<std::uint64_t>();
            (std::string_view(name) == "codebook" ? s.codebook_bytes : s.weight_section_bytes) += length;
        }
    }
    s.padding_bytes = s.file_bytes - s.payload_offset - s.weight_section_bytes - s.codebook_bytes;
    return s;
}

}  // namespace kbitq
