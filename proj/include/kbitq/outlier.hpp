// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kbitq/codebook.hpp"
#include "kbitq/quantizer.hpp"
#include "kbitq/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace kbitq {

/// Consecutive linear layers. Layer i is an h_i x o_i matrix (rows are input
/// dimensions), and its o_i outputs feed the h_{i+1} inputs of layer i + 1.
struct LayerChain {
    std::vector<Tensor> layers;

    /// Throws EmptyInput for an empty chain, Dimension for non-matrices or o_i != h_{i+1}.
    void validate() const;
};

/// Per-layer sorted input dimensions held at 16 bits.
struct OutlierSet {
    double fraction = 0.0;
    std::vector<std::vector<std::uint32_t>> dims;
};

/// round(p * units) with halves rounded up.
std::uint64_t outlier_count(double fraction, std::uint64_t units);

/// Population standard deviation of each column (hidden unit) over the input axis.
std::vector<double> unit_std(const Tensor& weight);

/// The `count` largest entries, ties to the lower index, returned in ascending index order.
std::vector<std::uint32_t> top_units(std::span<const double> scores, std::uint64_t count);

/// Proxy detection: the hidden units of layer i with the largest weight std
/// become the 16-bit input dimensions of layer i + 1. The first layer gets none.
OutlierSet detect_outlier_dims(const LayerChain& chain, double fraction);

/// Rows of `weight` listed in `rows` are kept verbatim at binary16; the remaining
/// rows are flattened in order and quantized blockwise per `config`.
QuantizedTensor quantize_mixed(const Tensor& weight, std::span<const std::uint32_t> rows, const Codebook& codebook,
                               const QuantConfig& config);

}  // namespace kbitq
