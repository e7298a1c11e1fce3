// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kbitq/codebook.hpp"
#include "kbitq/half.hpp"
#include "kbitq/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kbitq {

/// Full description of a quantization method.
struct QuantConfig {
    CodebookKind kind = CodebookKind::Int;
    int bits = 4;
    /// Float kind only; 0 selects default_exponent_bits(bits).
    int exponent_bits = 0;
    /// Elements per block; nullopt normalizes the whole tensor with one constant.
    std::optional<std::uint64_t> block_size;
    bool centered = false;
    /// Fraction of input dimensions kept at 16 bits; 0 disables.
    double outlier_fraction = 0.0;

    /// Throws PrecisionRange / InvalidSpec / InvalidFraction on bad fields.
    void validate() const;
    [[nodiscard]] int resolved_exponent_bits() const;
    [[nodiscard]] std::uint64_t block_for(std::uint64_t element_count) const {
        return block_size.value_or(element_count == 0 ? 1 : element_count);
    }

    friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

/// Packed k-bit codes plus the per-block sidecar data needed to decode them.
struct QuantizedTensor {
    std::string name;
    Shape shape;
    QuantConfig config;
    /// Number of elements stored as k-bit codes (excludes outlier rows).
    std::uint64_t quantized_count = 0;
    std::vector<std::uint8_t> indices;
    std::vector<Half> absmax;
    /// One per block when config.centered, otherwise empty.
    std::vector<Half> means;
    /// Embedded normalized codebook, Quantile kind only.
    std::vector<float> codebook_values;
    /// Sorted leading-axis rows kept at 16 bits.
    std::vector<std::uint32_t> outlier_rows;
    /// Row-major values of the outlier rows.
    std::vector<Half> outlier_values;

    [[nodiscard]] std::uint64_t element_count() const { return kbitq::element_count(shape); }
    [[nodiscard]] std::uint64_t row_length() const;
    [[nodiscard]] std::uint64_t num_blocks() const { return absmax.size(); }

    friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

/// Codebook described by the config (Quantile kind needs embedded values).
Codebook codebook_for(const QuantConfig& config);
/// Codebook a quantized tensor decodes with; embedded values win for Quantile.
Codebook codebook_for(const QuantizedTensor& q);

std::uint64_t block_count(std::uint64_t element_count, std::uint64_t block_size);

/// Little-endian bitstream, LSB-first, `bits` per index, zero-padded to a byte.
std::vector<std::uint8_t> pack_indices(std::span<const std::uint8_t> indices, int bits);
std::vector<std::uint8_t> unpack_indices(std::span<const std::uint8_t> bytes, int bits, std::uint64_t count);

/// Blockwise absmax quantization of every element of `t` (row-major).
/// Each block is optionally mean-centered; constants and means are stored as binary16.
QuantizedTensor quantize_tensor(const Tensor& t, const Codebook& codebook, const QuantConfig& config);

DequantizedTensor dequantize_tensor(const QuantizedTensor& q, const Codebook& codebook);
DequantizedTensor dequantize_tensor(const QuantizedTensor& q);

/// Values the codebook is applied to: each block shifted by its stored mean
/// (when centered) and divided by its stored constant. Zero blocks map to 0.
/// `skip_rows` excludes leading-axis rows, as for outlier rows.
std::vector<float> normalized_values(const Tensor& t, const QuantConfig& config,
                                     std::span<const std::uint32_t> skip_rows = {});

/// The config's codebook; Quantile kind is estimated from normalized_values()
/// (an all-zero sample falls back to the int lattice).
Codebook codebook_from_data(const Tensor& t, const QuantConfig& config, std::span<const std::uint32_t> skip_rows = {});

/// Builds the config's codebook and quantizes. Quantile codebooks are estimated
/// from normalized_values() and embedded in the result.
QuantizedTensor quantize(const Tensor& t, const QuantConfig& config,
                         std::span<const std::uint32_t> outlier_rows = {});

}  // namespace kbitq
