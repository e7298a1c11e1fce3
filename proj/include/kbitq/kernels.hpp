// SPDX-License-Identifier: Apache-2.0
#pragma once

// Block kernels behind the quantizer. `reference` is the plain serial
// implementation (exhaustive argmin, bit-at-a-time packing) kept as the
// oracle; `omp` is the production path. Both must produce bit-identical output.

#include "kbitq/codebook.hpp"
#include "kbitq/half.hpp"

#include <cstdint>
#include <span>

namespace kbitq::kernels {

struct BlockLayout {
    std::uint64_t block_size;
    bool centered;
};

namespace reference {

void encode_blocks(std::span<const float> values, const Codebook& codebook, BlockLayout layout,
                   std::span<std::uint8_t> codes, std::span<Half> absmax, std::span<Half> means);
void decode_blocks(std::span<const std::uint8_t> codes, const Codebook& codebook, BlockLayout layout,
                   std::span<const Half> absmax, std::span<const Half> means, std::span<float> out);
void pack(std::span<const std::uint8_t> codes, int bits, std::span<std::uint8_t> out);
void unpack(std::span<const std::uint8_t> bytes, int bits, std::span<std::uint8_t> codes);

}  // namespace reference

namespace omp {

void encode_blocks(std::span<const float> values, const Codebook& codebook, BlockLayout layout,
                   std::span<std::uint8_t> codes, std::span<Half> absmax, std::span<Half> means);
void decode_blocks(std::span<const std::uint8_t> codes, const Codebook& codebook, BlockLayout layout,
                   std::span<const Half> absmax, std::span<const Half> means, std::span<float> out);
void pack(std::span<const std::uint8_t> codes, int bits, std::span<std::uint8_t> out);
void unpack(std::span<const std::uint8_t> bytes, int bits, std::span<std::uint8_t> codes);

}  // namespace omp

/// Binary16 block statistics shared by both paths so rounding is identical.
struct BlockStats {
    Half absmax;
    Half mean;
};
BlockStats block_stats(std::span<const float> block, bool centered) noexcept;

inline std::uint64_t packed_size(std::uint64_t count, int bits) { return (count * bits + 7) / 8; }

}  // namespace kbitq::kernels
