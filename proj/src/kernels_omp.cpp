// SPDX-License-Identifier: Apache-2.0
#include "kbitq/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace kbitq::kernels::omp {

void encode_blocks(std::span<const float> values, const Codebook& codebook, BlockLayout layout,
                   std::span<std::uint8_t> codes, std::span<Half> absmax, std::span<Half> means) {
    const auto num_blocks = static_cast<std::int64_t>(absmax.size());
    const std::uint8_t zero = codebook.zero_index();

#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < num_blocks; ++b) {
        const std::uint64_t begin = static_cast<std::uint64_t>(b) * layout.block_size;
        const std::uint64_t end = std::min<std::uint64_t>(begin + layout.block_size, values.size());
        const auto block = values.subspan(begin, end - begin);
        const BlockStats stats = block_stats(block, layout.centered);
        absmax[static_cast<std::size_t>(b)] = stats.absmax;
        if (layout.centered) means[static_cast<std::size_t>(b)] = stats.mean;

        const float c = stats.absmax.to_float();
        auto out = codes.subspan(begin, end - begin);
        if (c == 0.0f) {
            std::fill(out.begin(), out.end(), zero);
            continue;
        }
        const float m = stats.mean.to_float();
        for (std::size_t i = 0; i < block.size(); ++i) out[i] = codebook.nearest((block[i] - m) / c);
    }
}

void decode_blocks(std::span<const std::uint8_t> codes, const Codebook& codebook, BlockLayout layout,
                   std::span<const Half> absmax, std::span<const Half> means, std::span<float> out) {
    const auto num_blocks = static_cast<std::int64_t>(absmax.size());
    const auto cb = codebook.values();

#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < num_blocks; ++b) {
        const std::uint64_t begin = static_cast<std::uint64_t>(b) * layout.block_size;
        const std::uint64_t end = std::min<std::uint64_t>(begin + layout.block_size, codes.size());
        const float c = absmax[static_cast<std::size_t>(b)].to_float();
        const float m = layout.centered ? means[static_cast<std::size_t>(b)].to_float() : 0.0f;
        for (std::uint64_t i = begin; i < end; ++i) out[i] = cb[codes[i]] * c + m;
    }
}

// Eight codes always fill exactly `bits` bytes, so groups of eight pack independently.

void pack(std::span<const std::uint8_t> codes, int bits, std::span<std::uint8_t> out) {
    const auto groups = static_cast<std::int64_t>((codes.size() + 7) / 8);
    const auto ubits = static_cast<std::uint64_t>(bits);

#pragma omp parallel for schedule(static)
    for (std::int64_t g = 0; g < groups; ++g) {
        const std::uint64_t first = static_cast<std::uint64_t>(g) * 8;
        const std::uint64_t n = std::min<std::uint64_t>(8, codes.size() - first);
        std::uint64_t acc = 0;
        for (std::uint64_t j = 0; j < n; ++j) acc |= static_cast<std::uint64_t>(codes[first + j]) << (j * ubits);
        const std::uint64_t byte0 = static_cast<std::uint64_t>(g) * ubits;
        const std::uint64_t nbytes = std::min<std::uint64_t>(ubits, out.size() - byte0);
        for (std::uint64_t k = 0; k < nbytes; ++k) out[byte0 + k] = static_cast<std::uint8_t>(acc >> (8 * k));
    }
}

void unpack(std::span<const std::uint8_t> bytes, int bits, std::span<std::uint8_t> codes) {
    const auto groups = static_cast<std::int64_t>((codes.size() + 7) / 8);
    const auto ubits = static_cast<std::uint64_t>(bits);
    const std::uint64_t mask = (std::uint64_t{1} << ubits) - 1;

#pragma omp parallel for schedule(static)
    for (std::int64_t g = 0; g < groups; ++g) {
        const std::uint64_t first = static_cast<std::uint64_t>(g) * 8;
        const std::uint64_t n = std::min<std::uint64_t>(8, codes.size() - first);
        const std::uint64_t byte0 = static_cast<std::uint64_t>(g) * ubits;
        const std::uint64_t nbytes = std::min<std::uint64_t>(ubits, bytes.size() - byte0);
        std::uint64_t acc = 0;
        for (std::uint64_t k = 0; k < nbytes; ++k) acc |= static_cast<std::uint64_t>(bytes[byte0 + k]) << (8 * k);
        for (std::uint64_t j = 0; j < n; ++j) codes[first + j] = static_cast<std::uint8_t>((acc >> (j * ubits)) & mask);
    }
}

}  // namespace kbitq::kernels::omp
