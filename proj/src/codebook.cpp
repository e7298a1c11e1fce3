// SPDX-License-Identifier: Apache-2.0
#include "kbitq/codebook.hpp"

#include "kbitq/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace kbitq {
namespace {

void check_bits(int bits, int lo = kMinBits, int hi = kMaxBits) {
    if (bits < lo || bits > hi) {
        throw Error(Errc::PrecisionRange, "bit width " + std::to_string(bits) + " outside [" +
                                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

}  // namespace

std::string_view kind_name(CodebookKind kind) noexcept {
    switch (kind) {
        case CodebookKind::Int: return "int";
        case CodebookKind::Float: return "float";
        case CodebookKind::DynamicExponent: return "dynamic";
        case CodebookKind::Quantile: return "quantile";
    }
    return "unknown";
}

CodebookKind parse_kind(std::string_view name) {
    if (name == "int") return CodebookKind::Int;
    if (name == "float") return CodebookKind::Float;
    if (name == "dynamic") return CodebookKind::DynamicExponent;
    if (name == "quantile") return CodebookKind::Quantile;
    throw Error(Errc::InvalidSpec, "unknown data type '" + std::string(name) + "'");
}

Codebook::Codebook(CodebookKind kind, int bits, std::vector<float> values)
    : kind_(kind), bits_(bits), values_(std::move(values)) {
    check_bits(bits_);
    if (values_.size() < 2 || values_.size() > (std::size_t{1} << bits_)) {
        throw Error(Errc::InvalidSpec, "codebook with " + std::to_string(values_.size()) +
                                           " values does not fit " + std::to_string(bits_) + " bits");
    }
    float absmax = 0.0f;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || values_[i] < -1.0f || values_[i] > 1.0f) {
            throw Error(Errc::InvalidValue, "codebook value outside [-1, 1]");
        }
        if (i > 0 && !(values_[i - 1] < values_[i])) {
            throw Error(Errc::InvalidValue, "codebook values must be strictly ascending");
        }
        absmax = std::max(absmax, std::fabs(values_[i]));
    }
    if (absmax != 1.0f) {
        throw Error(Errc::InvalidValue, "codebook is not absmax-normalized");
    }
    zero_index_ = nearest(0.0f);
}

Codebook Codebook::from_values(CodebookKind kind, int bits, std::vector<double> raw) {
    if (raw.empty()) {
        throw Error(Errc::EmptyInput, "codebook needs at least one value");
    }
    double absmax = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v)) throw Error(Errc::InvalidValue, "non-finite codebook value");
        absmax = std::max(absmax, std::fabs(v));
    }
    if (absmax == 0.0) {
        throw Error(Errc::InvalidValue, "codebook values are all zero");
    }
    std::vector<float> values;
    values.reserve(raw.size());
    for (double v : raw) values.push_back(static_cast<float>(v / absmax));
    std::sort(values.begin(), values.end());
    // -0.0f == 0.0f, so the signed zeros collapse here as well.
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (float& v : values) {
        if (v == 0.0f) v = 0.0f;
    }
    return Codebook(kind, bits, std::move(values));
}

Codebook Codebook::from_normalized(CodebookKind kind, int bits, std::vector<float> values) {
    return Codebook(kind, bits, std::move(values));
}

std::uint8_t Codebook::nearest(float x) const noexcept {
    const auto n = values_.size();
    const auto it = std::lower_bound(values_.begin(), values_.end(), x);
    auto hi = static_cast<std::size_t>(it - values_.begin());
    std::size_t best = 0;
    if (hi == 0) {
        best = 0;
    } else if (hi == n) {
        best = n - 1;
    } else {
        const float d_lo = std::fabs(values_[hi - 1] - x);
        const float d_hi = std::fabs(values_[hi] - x);
        best = d_lo <= d_hi ? hi - 1 : hi;
    }
    // Rounded distances can tie with a further-left code; keep the smallest index.
    const float d_best = std::fabs(values_[best] - x);
    while (best > 0 && std::fabs(values_[best - 1] - x) == d_best) --best;
    return static_cast<std::uint8_t>(best);
}

float Codebook::max_gap() const noexcept {
    float gap = 0.0f;
    for (std::size_t i = 1; i < values_.size(); ++i) gap = std::max(gap, values_[i] - values_[i - 1]);
    return gap;
}

std::uint8_t lookup_index(const Codebook& codebook, float x) {
    if (!std::isfinite(x)) {
        throw Error(Errc::InvalidValue, "cannot quantize a non-finite value");
    }
    return codebook.nearest(x);
}

Codebook build_int_codebook(int bits) {
    check_bits(bits);
    const int m = (1 << (bits - 1)) - 1;
    std::vector<double> raw;
    raw.reserve(static_cast<std::size_t>(2 * m + 1));
    for (int j = -m; j <= m; ++j) raw.push_back(static_cast<double>(j) / m);
    return Codebook::from_values(CodebookKind::Int, bits, std::move(raw));
}

double unsigned_int_value(int bits, std::uint32_t index) {
    check_bits(bits, 1, 32);
    const double top = std::ldexp(1.0, bits) - 1.0;
    if (index > top) {
        throw Error(Errc::InvalidIndex, "index exceeds the unsigned range");
    }
    return index / top;
}

FloatSpec FloatSpec::with_default_bias(int total_bits, int exponent_bits) {
    return FloatSpec{total_bits, exponent_bits, exponent_bits >= 1 ? 1 << (exponent_bits - 1) : 0};
}

Codebook build_float_codebook(const FloatSpec& spec) {
    check_bits(spec.total_bits, 3, kMaxBits);
    if (spec.exponent_bits < 1 || spec.exponent_bits >= spec.total_bits || spec.mantissa_bits() < 0) {
        throw Error(Errc::InvalidSpec, "float needs 1 <= exponent bits < total bits (got E=" +
                                           std::to_string(spec.exponent_bits) + ", k=" +
                                           std::to_string(spec.total_bits) + ")");
    }
    const int e_count = 1 << spec.exponent_bits;
    const int m_count = 1 << spec.mantissa_bits();
    std::vector<double> raw;
    raw.reserve(static_cast<std::size_t>(2 * e_count * m_count));
    for (int sign = 0; sign < 2; ++sign) {
        for (int e = 0; e < e_count; ++e) {
            for (int m = 0; m < m_count; ++m) {
                const double fraction = std::ldexp(static_cast<double>(m), -spec.mantissa_bits());
                const double magnitude = e == 0 ? std::ldexp(fraction, 1 - spec.bias)
                                                : std::ldexp(1.0 + fraction, e - spec.bias);
                raw.push_back(sign ? -magnitude : magnitude);
            }
        }
    }
    return Codebook::from_values(CodebookKind::Float, spec.total_bits, std::move(raw));
}

int default_exponent_bits(int bits) {
    check_bits(bits, 3, kMaxBits);
    return bits <= 5 ? 2 : 3;
}

int half_bits_exponent_heuristic(int bits) {
    check_bits(bits, 3, kMaxBits);
    return (bits + 1) / 2;
}

Codebook build_dynamic_codebook(const DynamicSpec& spec) {
    check_bits(spec.total_bits);
    if (!(spec.fraction_lo < spec.fraction_hi)) {
        throw Error(Errc::InvalidSpec, "dynamic fraction range must satisfy lo < hi");
    }
    const int magnitude_bits = spec.total_bits - 1;
    std::vector<double> raw;
    raw.reserve(std::size_t{2} << magnitude_bits);
    for (std::uint32_t pattern = 0; pattern < (1u << magnitude_bits); ++pattern) {
        double magnitude = 0.0;
        if (pattern != 0) {
            const int top = std::bit_width(pattern) - 1;  // position of the indicator bit
            const int zeros = magnitude_bits - 1 - top;
            const int fraction_bits = top;
            const std::uint32_t j = pattern & ((1u << fraction_bits) - 1u);
            double fraction = 1.0;
            if (fraction_bits > 0) {
                const double steps = static_cast<double>((1u << fraction_bits) - 1u);
                fraction = spec.fraction_lo + (spec.fraction_hi - spec.fraction_lo) * (j / steps);
            }
            magnitude = fraction / std::pow(10.0, zeros);
        }
        raw.push_back(magnitude);
        raw.push_back(-magnitude);
    }
    return Codebook::from_values(CodebookKind::DynamicExponent, spec.total_bits, std::move(raw));
}

SortedSample::SortedSample(std::span<const float> data) : sorted_(data.begin(), data.end()) {
    if (sorted_.empty()) {
        throw Error(Errc::EmptyInput, "quantile estimation needs a non-empty sample");
    }
    for (double v : sorted_) {
        if (!std::isfinite(v)) throw Error(Errc::InvalidValue, "non-finite value in sample");
    }
    std::sort(sorted_.begin(), sorted_.end());
}

double SortedSample::quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(Errc::OutOfRange, "quantile probability outside [0, 1]");
    }
    const double h = static_cast<double>(sorted_.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted_.size()) return sorted_.back();
    const double t = h - static_cast<double>(lo);
    return sorted_[lo] + t * (sorted_[lo + 1] - sorted_[lo]);
}

double estimate_quantile(std::span<const float> data, double p) {
    return SortedSample(data).quantile(p);
}

std::vector<double> quantile_bin_edges(const std::function<double(double)>& quantile_fn, int bits) {
    check_bits(bits);
    const std::size_t n = std::size_t{1} << bits;
    std::vector<double> edges(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        edges[i] = quantile_fn(static_cast<double>(i) / static_cast<double>(n + 1));
    }
    return edges;
}

std::vector<double> quantile_midpoints(const std::function<double(double)>& quantile_fn, int bits) {
    const auto edges = quantile_bin_edges(quantile_fn, bits);
    std::vector<double> mids(edges.size() - 1);
    for (std::size_t i = 0; i < mids.size(); ++i) mids[i] = 0.5 * (edges[i] + edges[i + 1]);
    return mids;
}

Codebook build_quantile_codebook(const QuantileSpec& spec) {
    check_bits(spec.total_bits);
    if (spec.sample.empty()) {
        throw Error(Errc::EmptyInput, "quantile codebook needs a non-empty sample");
    }
    float absmax = 0.0f;
    for (float v : spec.sample) {
        if (!std::isfinite(v)) throw Error(Errc::InvalidValue, "non-finite value in sample");
        absmax = std::max(absmax, std::fabs(v));
    }
    if (absmax == 0.0f) {
        throw Error(Errc::InvalidValue, "quantile sample has no non-zero values");
    }
    std::vector<float> normalized(spec.sample.size());
    std::transform(spec.sample.begin(), spec.sample.end(), normalized.begin(),
                   [absmax](float v) { return v / absmax; });
    const SortedSample sorted(normalized);

    auto mids = quantile_midpoints([&sorted](double p) { return sorted.quantile(p); }, spec.total_bits);
    if (std::none_of(mids.begin(), mids.end(), [](double v) { return v == 0.0; })) {
        auto closest = std::min_element(mids.begin(), mids.end(),
                                        [](double a, double b) { return std::fabs(a) < std::fabs(b); });
        *closest = 0.0;
    }
    return Codebook::from_values(CodebookKind::Quantile, spec.total_bits, std::move(mids));
}

}  // namespace kbitq
