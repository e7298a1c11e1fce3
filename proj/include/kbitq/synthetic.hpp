// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kbitq/outlier.hpp"
#include "kbitq/random.hpp"
#include "kbitq/tensor.hpp"

#include <cstdint>
#include <vector>

namespace kbitq {

/// Tensor of the given shape filled from the counter stream starting at `offset`.
Tensor synthetic_tensor(const Shape& shape, const SyntheticSpec& spec, std::uint64_t offset = 0);

struct ChainSpec {
    /// dims[i] x dims[i + 1] is the shape of layer i.
    std::vector<std::uint64_t> dims;
    /// Hidden units per layer (except the last) whose weights are scaled by `factor`.
    std::uint64_t planted = 0;
    double factor = 20.0;
    SyntheticSpec data;
};

struct PlantedChain {
    LayerChain chain;
    /// planted[i] are the scaled input rows of layer i, sorted; planted[0] is empty.
    std::vector<std::vector<std::uint32_t>> planted;
};

/// Planting unit u of layer i scales column u of layer i and row u of layer i + 1.
PlantedChain planted_chain(const ChainSpec& spec);

/// `count` distinct values from [0, n), sorted, chosen by a seeded partial shuffle.
std::vector<std::uint32_t> sample_distinct(std::uint64_t n, std::uint64_t count, std::uint64_t seed);

}  // namespace kbitq
