// SPDX-License-Identifier: Apache-2.0
#include "kbitq/accounting.hpp"

#include "kbitq/error.hpp"
#include "kbitq/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace kbitq {

BitsBreakdown bits_per_param(const QuantConfig& config, std::optional<std::uint64_t> element_count) {
    BitsBreakdown out;
    out.base_bits = config.bits;
    double per_constant = 0.0;
    if (config.block_size) {
        per_constant = 16.0 / static_cast<double>(*config.block_size);
    } else if (element_count && *element_count > 0) {
        per_constant = 16.0 / static_cast<double>(*element_count);
    }
    out.block_overhead = per_constant;
    out.centering_overhead = config.centered ? per_constant : 0.0;
    out.outlier_overhead = config.outlier_fraction * (16 - config.bits);
    out.total = out.base_bits + out.block_overhead + out.centering_overhead + out.outlier_overhead;
    return out;
}

TensorFootprint footprint_of(const QuantizedTensor& q) {
    return {q.element_count(), q.config, q.outlier_rows.size(), q.row_length()};
}

SectionBytes section_bytes(const TensorFootprint& tensor) {
    const std::uint64_t outlier_elems = tensor.outlier_rows * tensor.row_length;
    const std::uint64_t coded = tensor.element_count - std::min(outlier_elems, tensor.element_count);
    const std::uint64_t blocks = block_count(coded, tensor.config.block_for(coded));
    SectionBytes s;
    s.indices = kernels::packed_size(coded, tensor.config.bits);
    s.absmax = 2 * blocks;
    s.means = tensor.config.centered ? 2 * blocks : 0;
    s.outlier_dims = 4 * tensor.outlier_rows;
    s.outlier_values = 2 * outlier_elems;
    return s;
}

std::uint64_t total_model_bits(std::span<const TensorFootprint> tensors) {
    std::uint64_t bytes = 0;
    for (const auto& t : tensors) bytes += section_bytes(t).total();
    return 8 * bytes;
}

ErrorReport error_metrics(const Tensor& original, const Tensor& dequantized, const QuantizedTensor& q) {
    if (original.shape != dequantized.shape || original.values.size() != dequantized.values.size()) {
        throw Error(Errc::Dimension, "original and dequantized tensors differ in shape");
    }
    const std::size_t n = original.values.size();
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double signal = 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = original.values[i];
        const double e = std::fabs(x - static_cast<double>(dequantized.values[i]));
        abs_sum += e;
        sq_sum += e * e;
        signal += x * x;
        worst = std::max(worst, e);
    }
    ErrorReport r;
    if (n > 0) {
        r.mae = abs_sum / static_cast<double>(n);
        r.mse = sq_sum / static_cast<double>(n);
    }
    r.max_abs_error = worst;
    if (sq_sum > 0.0) {
        r.snr_db = 10.0 * std::log10(signal / sq_sum);
    }

    if (q.quantized_count > 0) {
        const auto codes = unpack_indices(q.indices, q.config.bits, q.quantized_count);
        std::array<bool, 256> used{};
        for (std::uint8_t c : codes) used[c] = true;
        const auto distinct = std::count(used.begin(), used.end(), true);
        r.codebook_utilization = static_cast<double>(distinct) / static_cast<double>(codebook_for(q).size());
    }
    return r;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(Errc::Dimension, "correlation inputs differ in length");
    }
    if (x.size() < 2) {
        throw Error(Errc::InsufficientData, "correlation needs at least two points");
    }
    const auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
    };
    if (constant(x) || constant(y)) {
        throw Error(Errc::UndefinedCorrelation, "correlation is undefined for a constant sequence");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw Error(Errc::UndefinedCorrelation, "correlation is undefined for a constant sequence");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace kbitq
