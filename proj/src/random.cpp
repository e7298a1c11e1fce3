// SPDX-License-Identifier: Apache-2.0
#include "kbitq/random.hpp"

#include "kbitq/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace kbitq {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed ^ 0x6A09E667F3BCC909ull)) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const noexcept {
    return mix64(key_ + (counter + 1) * kGolden);
}

double CounterRng::uniform(std::uint64_t counter) const noexcept {
    // 53 random bits, shifted off zero by half a step.
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const noexcept {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Distribution parse_distribution(std::string_view name) {
    if (name == "gaussian" || name == "normal") return Distribution::Gaussian;
    if (name == "student-t" || name == "student_t") return Distribution::StudentT;
    if (name == "uniform") return Distribution::Uniform;
    throw Error(Errc::InvalidSpec, "unknown distribution '" + std::string(name) + "'");
}

std::string_view distribution_name(Distribution dist) noexcept {
    switch (dist) {
        case Distribution::Gaussian: return "gaussian";
        case Distribution::StudentT: return "student-t";
        case Distribution::Uniform: return "uniform";
    }
    return "unknown";
}

void fill_synthetic(std::span<float> out, const SyntheticSpec& spec, std::uint64_t offset) {
    const CounterRng rng(spec.seed);
    const auto n = static_cast<std::int64_t>(out.size());
    const int df = static_cast<int>(std::lround(spec.student_t_df));
    if (spec.distribution == Distribution::StudentT && (df < 1 || df != spec.student_t_df)) {
        throw Error(Errc::InvalidSpec, "Student-t degrees of freedom must be a positive integer");
    }
    // Each element consumes a disjoint counter window, so chunks can be drawn in parallel.
    const std::uint64_t stride = spec.distribution == Distribution::StudentT ? static_cast<std::uint64_t>(df) + 1 : 1;

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::uint64_t c = (offset + static_cast<std::uint64_t>(i)) * stride;
        double v = 0.0;
        switch (spec.distribution) {
            case Distribution::Gaussian:
                v = rng.normal(c);
                break;
            case Distribution::Uniform:
                v = 2.0 * rng.uniform(c) - 1.0;
                break;
            case Distribution::StudentT: {
                double chi2 = 0.0;
                for (int j = 1; j <= df; ++j) {
                    const double z = rng.normal(c + static_cast<std::uint64_t>(j));
                    chi2 += z * z;
                }
                v = rng.normal(c) / std::sqrt(chi2 / df);
                break;
            }
        }
        out[static_cast<std::size_t>(i)] = static_cast<float>(v);
    }
}

}  // namespace kbitq
