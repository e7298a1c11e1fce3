// SPDX-License-Identifier: Apache-2.0
#include "kbitq/quantizer.hpp"

#include "kbitq/error.hpp"
#include "kbitq/kernels.hpp"
#include "kbitq/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kbitq {
namespace {

void require_well_formed(const Tensor& t) {
    if (t.values.empty()) {
        throw Error(Errc::EmptyInput, "cannot quantize an empty tensor");
    }
    if (element_count(t.shape) != t.values.size()) {
        throw Error(Errc::Dimension, "tensor shape does not match its element count");
    }
    bool finite = true;
    const auto n = static_cast<std::int64_t>(t.values.size());
#pragma omp parallel for reduction(&& : finite) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) finite = finite && std::isfinite(t.values[static_cast<std::size_t>(i)]);
    if (!finite) {
        throw Error(Errc::InvalidValue, "tensor contains non-finite values");
    }
}

void require_matching(const Codebook& codebook, const QuantConfig& config) {
    if (codebook.kind() != config.kind || codebook.bits() != config.bits) {
        throw Error(Errc::InvalidSpec, "codebook does not match the quantization config");
    }
}

// An all-zero tensor decodes to zero under any codebook containing 0; the
// integer lattice keeps the embedded codebook valid.
Codebook zero_sample_codebook(int bits) {
    const Codebook lattice = build_int_codebook(bits);
    return Codebook::from_normalized(CodebookKind::Quantile, bits,
                                     std::vector<float>(lattice.values().begin(), lattice.values().end()));
}

}  // namespace

void QuantConfig::validate() const {
    const int lo = kind == CodebookKind::Float ? 3 : kMinBits;
    if (bits < lo || bits > kMaxBits) {
        throw Error(Errc::PrecisionRange, "bit width " + std::to_string(bits) + " outside [" +
                                              std::to_string(lo) + ", " + std::to_string(kMaxBits) + "]");
    }
    if (kind == CodebookKind::Float) {
        const int e = resolved_exponent_bits();
        if (e < 1 || e >= bits) {
            throw Error(Errc::InvalidSpec, "float needs 1 <= exponent bits < total bits");
        }
    } else if (exponent_bits != 0) {
        throw Error(Errc::InvalidSpec, "exponent bits only apply to the float data type");
    }
    if (block_size && *block_size == 0) {
        throw Error(Errc::InvalidSpec, "block size must be at least 1");
    }
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) {
        throw Error(Errc::InvalidFraction, "outlier fraction must lie in [0, 1)");
    }
}

int QuantConfig::resolved_exponent_bits() const {
    if (kind != CodebookKind::Float) return 0;
    return exponent_bits != 0 ? exponent_bits : default_exponent_bits(bits);
}

std::uint64_t QuantizedTensor::row_length() const {
    if (shape.empty() || shape.front() == 0) return element_count();
    return element_count() / shape.front();
}

Codebook codebook_for(const QuantConfig& config) {
    config.validate();
    switch (config.kind) {
        case CodebookKind::Int:
            return build_int_codebook(config.bits);
        case CodebookKind::Float:
            return build_float_codebook(FloatSpec::with_default_bias(config.bits, config.resolved_exponent_bits()));
        case CodebookKind::DynamicExponent:
            return build_dynamic_codebook(DynamicSpec{config.bits});
        case CodebookKind::Quantile:
            break;
    }
    throw Error(Errc::InvalidSpec, "quantile codebooks are estimated from data");
}

Codebook codebook_for(const QuantizedTensor& q) {
    if (q.config.kind != CodebookKind::Quantile) return codebook_for(q.config);
    try {
        return Codebook::from_normalized(q.config.kind, q.config.bits, q.codebook_values);
    } catch (const Error& e) {
        throw Error(Errc::CorruptData, std::string("embedded quantile codebook is invalid: ") + e.what());
    }
}

std::uint64_t block_count(std::uint64_t element_count, std::uint64_t block_size) {
    return block_size == 0 ? 0 : (element_count + block_size - 1) / block_size;
}

std::vector<std::uint8_t> pack_indices(std::span<const std::uint8_t> indices, int bits) {
    if (bits < kMinBits || bits > kMaxBits) {
        throw Error(Errc::PrecisionRange, "pack width " + std::to_string(bits) + " outside [2, 8]");
    }
    const unsigned limit = 1u << bits;
    if (std::any_of(indices.begin(), indices.end(), [limit](std::uint8_t i) { return i >= limit; })) {
        throw Error(Errc::InvalidValue, "index does not fit in " + std::to_string(bits) + " bits");
    }
    std::vector<std::uint8_t> out(kernels::packed_size(indices.size(), bits));
    kernels::omp::pack(indices, bits, out);
    return out;
}

std::vector<std::uint8_t> unpack_indices(std::span<const std::uint8_t> bytes, int bits, std::uint64_t count) {
    if (bits < kMinBits || bits > kMaxBits) {
        throw Error(Errc::PrecisionRange, "unpack width " + std::to_string(bits) + " outside [2, 8]");
    }
    if (bytes.size() < kernels::packed_size(count, bits)) {
        throw Error(Errc::Length, "packed index stream is shorter than its element count");
    }
    std::vector<std::uint8_t> codes(count);
    kernels::omp::unpack(bytes, bits, codes);
    return codes;
}

QuantizedTensor quantize_tensor(const Tensor& t, const Codebook& codebook, const QuantConfig& config) {
    config.validate();
    require_matching(codebook, config);
    require_well_formed(t);

    const std::uint64_t n = t.values.size();
    const kernels::BlockLayout layout{config.block_for(n), config.centered};
    const std::uint64_t blocks = block_count(n, layout.block_size);

    QuantizedTensor q;
    q.shape = t.shape;
    q.config = config;
    q.config.exponent_bits = config.resolved_exponent_bits();
    q.quantized_count = n;
    q.absmax.resize(blocks);
    if (config.centered) q.means.resize(blocks);

    std::vector<std::uint8_t> codes(n);
    kernels::omp::encode_blocks(t.values, codebook, layout, codes, q.absmax, q.means);

    const auto overflow = [](Half h) { return !h.is_finite(); };
    if (std::any_of(q.absmax.begin(), q.absmax.end(), overflow) ||
        std::any_of(q.means.begin(), q.means.end(), overflow)) {
        throw Error(Errc::InvalidValue, "block statistics exceed the binary16 range");
    }
    q.indices = pack_indices(codes, config.bits);
    if (config.kind == CodebookKind::Quantile) {
        q.codebook_values.assign(codebook.values().begin(), codebook.values().end());
    }
    return q;
}

DequantizedTensor dequantize_tensor(const QuantizedTensor& q, const Codebook& codebook) {
    require_matching(codebook, q.config);
    const std::uint64_t total = q.element_count();
    const std::uint64_t row_len = q.row_length();
    const std::uint64_t outlier_elems = q.outlier_rows.size() * row_len;
    const std::uint64_t n = q.quantized_count;
    const std::uint64_t block = q.config.block_for(n);

    if (n + outlier_elems != total || q.outlier_values.size() != outlier_elems ||
        q.indices.size() != kernels::packed_size(n, q.config.bits) || q.absmax.size() != block_count(n, block) ||
        q.means.size() != (q.config.centered ? q.absmax.size() : 0)) {
        throw Error(Errc::CorruptData, "quantized tensor sections are inconsistent with its shape");
    }
    const auto rows = q.shape.empty() ? std::uint64_t{1} : q.shape.front();
    for (std::size_t i = 0; i < q.outlier_rows.size(); ++i) {
        if (q.outlier_rows[i] >= rows || (i > 0 && q.outlier_rows[i] <= q.outlier_rows[i - 1])) {
            throw Error(Errc::CorruptData, "outlier row list is not sorted and in range");
        }
    }

    const auto codes = unpack_indices(q.indices, q.config.bits, n);
    const std::size_t limit = codebook.size();
    if (std::any_of(codes.begin(), codes.end(), [limit](std::uint8_t c) { return c >= limit; })) {
        throw Error(Errc::CorruptData, "index exceeds the codebook length");
    }

    DequantizedTensor out{q.shape, std::vector<float>(total)};
    if (q.outlier_rows.empty()) {
        kernels::omp::decode_blocks(codes, codebook, {block, q.config.centered}, q.absmax, q.means, out.values);
        return out;
    }

    std::vector<float> inliers(n);
    kernels::omp::decode_blocks(codes, codebook, {block, q.config.centered}, q.absmax, q.means, inliers);
    std::size_t next_outlier = 0;
    std::uint64_t inlier_pos = 0;
    for (std::uint64_t r = 0; r < rows; ++r) {
        float* dst = out.values.data() + r * row_len;
        if (next_outlier < q.outlier_rows.size() && q.outlier_rows[next_outlier] == r) {
            const Half* src = q.outlier_values.data() + next_outlier * row_len;
            for (std::uint64_t j = 0; j < row_len; ++j) dst[j] = src[j].to_float();
            ++next_outlier;
        } else {
            std::copy_n(inliers.begin() + static_cast<std::ptrdiff_t>(inlier_pos), row_len, dst);
            inlier_pos += row_len;
        }
    }
    return out;
}

DequantizedTensor dequantize_tensor(const QuantizedTensor& q) { return dequantize_tensor(q, codebook_for(q)); }

std::vector<float> normalized_values(const Tensor& t, const QuantConfig& config,
                                     std::span<const std::uint32_t> skip_rows) {
    std::vector<float> inliers;
    if (skip_rows.empty()) {
        inliers = t.values;
    } else {
        const std::uint64_t row_len = t.row_length();
        std::vector<std::uint32_t> skip(skip_rows.begin(), skip_rows.end());
        std::sort(skip.begin(), skip.end());
        std::size_t next = 0;
        for (std::uint64_t r = 0; r < t.rows(); ++r) {
            if (next < skip.size() && skip[next] == r) {
                while (next < skip.size() && skip[next] == r) ++next;
                continue;
            }
            const auto first = t.values.begin() + static_cast<std::ptrdiff_t>(r * row_len);
            inliers.insert(inliers.end(), first, first + static_cast<std::ptrdiff_t>(row_len));
        }
    }
    const std::uint64_t n = inliers.size();
    const std::uint64_t block = config.block_for(n);
    const auto blocks = static_cast<std::int64_t>(block_count(n, block));

#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < blocks; ++b) {
        const std::uint64_t begin = static_cast<std::uint64_t>(b) * block;
        const std::uint64_t end = std::min(begin + block, n);
        std::span<float> span(inliers.data() + begin, end - begin);
        const auto stats = kernels::block_stats(span, config.centered);
        const float c = stats.absmax.to_float();
        const float m = stats.mean.to_float();
        for (float& v : span) v = c == 0.0f ? 0.0f : (v - m) / c;
    }
    return inliers;
}

Codebook codebook_from_data(const Tensor& t, const QuantConfig& config, std::span<const std::uint32_t> skip_rows) {
    config.validate();
    if (config.kind != CodebookKind::Quantile) return codebook_for(config);
    require_well_formed(t);
    const auto sample = normalized_values(t, config, skip_rows);
    const bool all_zero = std::all_of(sample.begin(), sample.end(), [](float v) { return v == 0.0f; });
    return all_zero ? zero_sample_codebook(config.bits) : build_quantile_codebook(QuantileSpec{config.bits, sample});
}

QuantizedTensor quantize(const Tensor& t, const QuantConfig& config, std::span<const std::uint32_t> outlier_rows) {
    const Codebook codebook = codebook_from_data(t, config, outlier_rows);
    return outlier_rows.empty() ? quantize_tensor(t, codebook, config)
                                : quantize_mixed(t, outlier_rows, codebook, config);
}

}  // namespace kbitq
