// SPDX-License-Identifier: Apache-2.0
#include "kbitq/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace kbitq::kernels {

BlockStats block_stats(std::span<const float> block, bool centered) noexcept {
    float mean = 0.0f;
    if (centered && !block.empty()) {
        double sum = 0.0;
        for (float v : block) sum += v;
        mean = static_cast<float>(sum / static_cast<double>(block.size()));
    }
    const Half stored_mean = Half::from_float(mean);
    const float m = stored_mean.to_float();
    float absmax = 0.0f;
    for (float v : block) absmax = std::max(absmax, std::fabs(v - m));
    return {Half::from_float(absmax), stored_mean};
}

namespace reference {

void encode_blocks(std::span<const float> values, const Codebook& codebook, BlockLayout layout,
                   std::span<std::uint8_t> codes, std::span<Half> absmax, std::span<Half> means) {
    const auto cb = codebook.values();
    for (std::uint64_t b = 0; b < absmax.size(); ++b) {
        const std::uint64_t begin = b * layout.block_size;
        const std::uint64_t end = std::min<std::uint64_t>(begin + layout.block_size, values.size());
        const auto block = values.subspan(begin, end - begin);
        const BlockStats stats = block_stats(block, layout.centered);
        absmax[b] = stats.absmax;
        if (layout.centered) means[b] = stats.mean;
        const float c = stats.absmax.to_float();
        const float m = stats.mean.to_float();
        for (std::uint64_t i = begin; i < end; ++i) {
            if (c == 0.0f) {
                codes[i] = codebook.zero_index();
                continue;
            }
            const float x = (values[i] - m) / c;
            std::size_t best = 0;
            float best_d = std::fabs(cb[0] - x);
            for (std::size_t j = 1; j < cb.size(); ++j) {
                const float d = std::fabs(cb[j] - x);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            codes[i] = static_cast<std::uint8_t>(best);
        }
    }
}

void decode_blocks(std::span<const std::uint8_t> codes, const Codebook& codebook, BlockLayout layout,
                   std::span<const Half> absmax, std::span<const Half> means, std::span<float> out) {
    for (std::uint64_t i = 0; i < codes.size(); ++i) {
        const std::uint64_t b = i / layout.block_size;
        const float c = absmax[b].to_float();
        const float m = layout.centered ? means[b].to_float() : 0.0f;
        out[i] = codebook[codes[i]] * c + m;
    }
}

void pack(std::span<const std::uint8_t> codes, int bits, std::span<std::uint8_t> out) {
    std::fill(out.begin(), out.end(), std::uint8_t{0});
    for (std::uint64_t i = 0; i < codes.size(); ++i) {
        for (int b = 0; b < bits; ++b) {
            const std::uint64_t pos = i * static_cast<std::uint64_t>(bits) + static_cast<std::uint64_t>(b);
            const auto bit = static_cast<std::uint8_t>((codes[i] >> b) & 1u);
            out[pos / 8] = static_cast<std::uint8_t>(out[pos / 8] | (bit << (pos % 8)));
        }
    }
}

void unpack(std::span<const std::uint8_t> bytes, int bits, std::span<std::uint8_t> codes) {
    for (std::uint64_t i = 0; i < codes.size(); ++i) {
        std::uint8_t code = 0;
        for (int b = 0; b < bits; ++b) {
            const std::uint64_t pos = i * static_cast<std::uint64_t>(bits) + static_cast<std::uint64_t>(b);
            const auto bit = static_cast<std::uint8_t>((bytes[pos / 8] >> (pos % 8)) & 1u);
            code = static_cast<std::uint8_t>(code | (bit << b));
        }
        codes[i] = code;
    }
}

}  // namespace reference
}  // namespace kbitq::kernels
