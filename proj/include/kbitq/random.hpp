// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace kbitq {

/// Counter-based 64-bit generator.
///
/// Output i is SplitMix64's finalizer applied to (mixed seed + (i + 1) * golden),
/// so any draw is addressable without advancing state. Streams are identical
/// across platforms and independent of thread count.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept;

    [[nodiscard]] std::uint64_t bits(std::uint64_t counter) const noexcept;
    /// Uniform double in the open interval (0, 1).
    [[nodiscard]] double uniform(std::uint64_t counter) const noexcept;
    /// Standard normal via Box-Muller on draws 2*counter and 2*counter+1.
    [[nodiscard]] double normal(std::uint64_t counter) const noexcept;

private:
    std::uint64_t key_;
};

enum class Distribution { Gaussian, StudentT, Uniform };

Distribution parse_distribution(std::string_view name);
std::string_view distribution_name(Distribution dist) noexcept;

struct SyntheticSpec {
    Distribution distribution = Distribution::Gaussian;
    std::uint64_t seed = 0;
    double student_t_df = 2.0;
};

/// Fills `out` with element i drawn from the counter stream at `offset + i`.
/// Uniform draws lie in (-1, 1); Student-t uses integer degrees of freedom.
void fill_synthetic(std::span<float> out, const SyntheticSpec& spec, std::uint64_t offset = 0);

}  // namespace kbitq
