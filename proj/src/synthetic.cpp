// SPDX-License-Identifier: Apache-2.0
#include "kbitq/synthetic.hpp"

#include "kbitq/error.hpp"

#include <algorithm>
#include <numeric>

namespace kbitq {

Tensor synthetic_tensor(const Shape& shape, const SyntheticSpec& spec, std::uint64_t offset) {
    Tensor t{shape, std::vector<float>(element_count(shape))};
    fill_synthetic(t.values, spec, offset);
    return t;
}

std::vector<std::uint32_t> sample_distinct(std::uint64_t n, std::uint64_t count, std::uint64_t seed) {
    if (count > n) {
        throw Error(Errc::OutOfRange, "cannot sample more distinct values than the range holds");
    }
    std::vector<std::uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0u);
    const CounterRng rng(seed ^ 0x5EEDC0FFEEULL);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t j = i + rng.bits(i) % (n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

PlantedChain planted_chain(const ChainSpec& spec) {
    if (spec.dims.size() < 2) {
        throw Error(Errc::EmptyInput, "a chain needs at least one layer");
    }
    const std::size_t layers = spec.dims.size() - 1;
    PlantedChain out;
    out.planted.resize(layers);
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < layers; ++i) {
        out.chain.layers.push_back(synthetic_tensor({spec.dims[i], spec.dims[i + 1]}, spec.data, offset));
        offset += spec.dims[i] * spec.dims[i + 1];
    }
    const auto f = static_cast<float>(spec.factor);
    for (std::size_t i = 0; i + 1 < layers && spec.planted > 0; ++i) {
        const auto units = sample_distinct(spec.dims[i + 1], spec.planted, spec.data.seed + i);
        Tensor& w = out.chain.layers[i];
        Tensor& next = out.chain.layers[i + 1];
        const std::uint64_t cols = spec.dims[i + 1];
        const std::uint64_t next_cols = spec.dims[i + 2];
        for (std::uint32_t u : units) {
            for (std::uint64_t r = 0; r < spec.dims[i]; ++r) w.values[r * cols + u] *= f;
            for (std::uint64_t c = 0; c < next_cols; ++c) next.values[u * next_cols + c] *= f;
        }
        out.planted[i + 1] = units;
    }
    return out;
}

}  // namespace kbitq
