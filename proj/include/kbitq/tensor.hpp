// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace kbitq {

using Shape = std::vector<std::uint64_t>;

inline std::uint64_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1},
                           [](std::uint64_t a, std::uint64_t b) { return a * b; });
}

/// Dense row-major float tensor.
struct Tensor {
    Shape shape;
    std::vector<float> values;

    [[nodiscard]] std::uint64_t size() const { return values.size(); }
    [[nodiscard]] bool is_matrix() const { return shape.size() == 2; }
    [[nodiscard]] std::uint64_t rows() const { return shape.empty() ? 0 : shape.front(); }
    /// Elements per leading-axis slice; for a matrix, the column count.
    [[nodiscard]] std::uint64_t row_length() const {
        return shape.empty() || shape.front() == 0 ? 0 : values.size() / shape.front();
    }
};

using DequantizedTensor = Tensor;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

}  // namespace kbitq
