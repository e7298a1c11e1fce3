// SPDX-License-Identifier: Apache-2.0
#pragma once

// KBQ1 layout:
//   bytes 0..3   magic "KBQ1"
//   bytes 4..7   manifest length L, little-endian uint32
//   bytes 8..    UTF-8 JSON manifest (L bytes)
//   payload      starts at the first 8-byte boundary after the manifest
//
// Every section starts 8-byte aligned; manifest offsets are relative to the
// payload start. Sections per tensor: indices (packed k-bit codes), absmax and
// means (binary16), outlier_dims (uint32), outlier_values (binary16),
// codebook (float32, Quantile kind only). All integers are little-endian.

#include "kbitq/quantizer.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace kbitq {

inline constexpr std::array<char, 4> kKbqMagic = {'K', 'B', 'Q', '1'};
inline constexpr int kKbqVersion = 1;

std::vector<std::uint8_t> encode_kbq(std::span<const QuantizedTensor> tensors);
std::vector<QuantizedTensor> decode_kbq(std::span<const std::uint8_t> bytes);

void write_kbq(const std::filesystem::path& path, std::span<const QuantizedTensor> tensors);
std::vector<QuantizedTensor> read_kbq(const std::filesystem::path& path);

/// Byte counts of a KBQ file as declared by its manifest.
struct KbqSizes {
    std::uint64_t file_bytes = 0;
    std::uint64_t payload_offset = 0;
    /// Sum of section lengths, excluding embedded codebooks and alignment padding.
    std::uint64_t weight_section_bytes = 0;
    std::uint64_t codebook_bytes = 0;
    std::uint64_t padding_bytes = 0;
};

KbqSizes kbq_sizes(std::span<const std::uint8_t> bytes);

}  // namespace kbitq
