// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kbitq/quantizer.hpp"
#include "kbitq/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace kbitq {

/// Effective storage cost per parameter. Constants and means count 16 bits per
/// block; outliers count p * (16 - k). Outlier index lists are not included.
struct BitsBreakdown {
    double base_bits = 0.0;
    double block_overhead = 0.0;
    double centering_overhead = 0.0;
    double outlier_overhead = 0.0;
    double total = 0.0;
};

/// Whole-tensor normalization costs 16 / element_count when a count is given, 0 otherwise.
BitsBreakdown bits_per_param(const QuantConfig& config, std::optional<std::uint64_t> element_count = {});

/// What total_model_bits needs to know about one tensor.
struct TensorFootprint {
    std::uint64_t element_count = 0;
    QuantConfig config;
    std::uint64_t outlier_rows = 0;
    std::uint64_t row_length = 0;
};

TensorFootprint footprint_of(const QuantizedTensor& q);

/// Exact payload of one tensor, each section rounded up to whole bytes.
struct SectionBytes {
    std::uint64_t indices = 0;
    std::uint64_t absmax = 0;
    std::uint64_t means = 0;
    std::uint64_t outlier_dims = 0;
    std::uint64_t outlier_values = 0;

    [[nodiscard]] std::uint64_t total() const { return indices + absmax + means + outlier_dims + outlier_values; }
};

SectionBytes section_bytes(const TensorFootprint& tensor);

/// Sum of exact payload bits: k-bit indices, 16-bit constants and means,
/// 16-bit outlier rows and 32-bit outlier row indices.
std::uint64_t total_model_bits(std::span<const TensorFootprint> tensors);

struct ErrorReport {
    double mae = 0.0;
    double mse = 0.0;
    double max_abs_error = 0.0;
    /// nullopt when the reconstruction is lossless.
    std::optional<double> snr_db;
    /// Distinct codes used over codebook size; 0 when nothing was k-bit coded.
    double codebook_utilization = 0.0;
};

ErrorReport error_metrics(const Tensor& original, const Tensor& dequantized, const QuantizedTensor& q);

/// Product-moment correlation. Throws Dimension on length mismatch,
/// InsufficientData below two points, UndefinedCorrelation for constant input.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace kbitq
