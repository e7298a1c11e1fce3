// SPDX-License-Identifier: Apache-2.0
#include "kbitq/outlier.hpp"

#include "kbitq/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace kbitq {

void LayerChain::validate() const {
    if (layers.empty()) {
        throw Error(Errc::EmptyInput, "layer chain is empty");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Tensor& w = layers[i];
        if (!w.is_matrix() || element_count(w.shape) != w.values.size()) {
            throw Error(Errc::Dimension, "layer " + std::to_string(i) + " is not a well-formed matrix");
        }
        if (i > 0 && layers[i - 1].shape[1] != w.shape[0]) {
            throw Error(Errc::Dimension, "layer " + std::to_string(i - 1) + " outputs " +
                                             std::to_string(layers[i - 1].shape[1]) + " units but layer " +
                                             std::to_string(i) + " takes " + std::to_string(w.shape[0]));
        }
    }
}

std::uint64_t outlier_count(double fraction, std::uint64_t units) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw Error(Errc::InvalidFraction, "outlier fraction must lie in [0, 1)");
    }
    const auto count = static_cast<std::uint64_t>(std::floor(fraction * static_cast<double>(units) + 0.5));
    return std::min(count, units);
}

std::vector<double> unit_std(const Tensor& weight) {
    const std::uint64_t rows = weight.shape.at(0);
    const std::uint64_t cols = weight.shape.at(1);
    std::vector<double> mean(cols, 0.0);
    for (std::uint64_t r = 0; r < rows; ++r) {
        const float* row = weight.values.data() + r * cols;
        for (std::uint64_t c = 0; c < cols; ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= static_cast<double>(rows);
    std::vector<double> var(cols, 0.0);
    for (std::uint64_t r = 0; r < rows; ++r) {
        const float* row = weight.values.data() + r * cols;
        for (std::uint64_t c = 0; c < cols; ++c) {
            const double d = row[c] - mean[c];
            var[c] += d * d;
        }
    }
    for (double& v : var) v = std::sqrt(v / static_cast<double>(rows));
    return var;
}

std::vector<std::uint32_t> top_units(std::span<const double> scores, std::uint64_t count) {
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    count = std::min<std::uint64_t>(count, order.size());
    const auto mid = order.begin() + static_cast<std::ptrdiff_t>(count);
    std::partial_sort(order.begin(), mid, order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    order.erase(mid, order.end());
    std::sort(order.begin(), order.end());
    return order;
}

OutlierSet detect_outlier_dims(const LayerChain& chain, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw Error(Errc::InvalidFraction, "outlier fraction must lie in [0, 1)");
    }
    chain.validate();
    OutlierSet set{fraction, std::vector<std::vector<std::uint32_t>>(chain.layers.size())};
    const auto n = static_cast<std::int64_t>(chain.layers.size());

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n - 1; ++i) {
        const Tensor& w = chain.layers[static_cast<std::size_t>(i)];
        const auto count = outlier_count(fraction, w.shape[1]);
        if (count == 0) continue;
        const auto stds = unit_std(w);
        set.dims[static_cast<std::size_t>(i) + 1] = top_units(stds, count);
    }
    return set;
}

QuantizedTensor quantize_mixed(const Tensor& weight, std::span<const std::uint32_t> rows, const Codebook& codebook,
                               const QuantConfig& config) {
    if (rows.empty()) return quantize_tensor(weight, codebook, config);

    if (!weight.is_matrix() || element_count(weight.shape) != weight.values.size()) {
        throw Error(Errc::Dimension, "mixed-precision quantization needs a well-formed matrix");
    }
    std::vector<std::uint32_t> sorted(rows.begin(), rows.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.back() >= weight.shape[0]) {
        throw Error(Errc::InvalidIndex, "outlier rows must be unique and below " + std::to_string(weight.shape[0]));
    }

    const std::uint64_t cols = weight.shape[1];
    std::vector<float> inliers;
    inliers.reserve(weight.values.size() - sorted.size() * cols);
    std::vector<Half> outlier_values;
    outlier_values.reserve(sorted.size() * cols);
    std::size_t next = 0;
    for (std::uint64_t r = 0; r < weight.shape[0]; ++r) {
        const auto first = weight.values.begin() + static_cast<std::ptrdiff_t>(r * cols);
        const auto last = first + static_cast<std::ptrdiff_t>(cols);
        if (next < sorted.size() && sorted[next] == r) {
            for (auto it = first; it != last; ++it) {
                const Half h = Half::from_float(*it);
                if (!std::isfinite(*it) || !h.is_finite()) {
                    throw Error(Errc::InvalidValue, "outlier row value is not representable in binary16");
                }
                outlier_values.push_back(h);
            }
            ++next;
        } else {
            inliers.insert(inliers.end(), first, last);
        }
    }

    QuantizedTensor q;
    if (inliers.empty()) {
        config.validate();
        if (codebook.kind() != config.kind || codebook.bits() != config.bits) {
            throw Error(Errc::InvalidSpec, "codebook does not match the quantization config");
        }
        q.config = config;
        q.config.exponent_bits = config.resolved_exponent_bits();
        if (config.kind == CodebookKind::Quantile) {
            q.codebook_values.assign(codebook.values().begin(), codebook.values().end());
        }
    } else {
        const auto n = inliers.size();
        q = quantize_tensor(Tensor{{n}, std::move(inliers)}, codebook, config);
    }
    q.shape = weight.shape;
    q.outlier_rows = std::move(sorted);
    q.outlier_values = std::move(outlier_values);
    return q;
}

}  // namespace kbitq
