// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace kbitq {

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 8;

enum class CodebookKind : std::uint8_t { Int, Float, DynamicExponent, Quantile };

std::string_view kind_name(CodebookKind kind) noexcept;
CodebookKind parse_kind(std::string_view name);

/// Sorted set of distinct normalized values a k-bit code can decode to.
///
/// Invariants: strictly ascending, within [-1, 1], max |value| == 1,
/// 2 <= size() <= 2^bits.
class Codebook {
public:
    /// Sorts, collapses duplicates, divides by the absolute maximum and validates.
    static Codebook from_values(CodebookKind kind, int bits, std::vector<double> raw);
    /// Wraps already-normalized values (e.g. read back from a file); validates only.
    static Codebook from_normalized(CodebookKind kind, int bits, std::vector<float> values);

    [[nodiscard]] CodebookKind kind() const noexcept { return kind_; }
    [[nodiscard]] int bits() const noexcept { return bits_; }
    [[nodiscard]] std::span<const float> values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] float operator[](std::size_t i) const noexcept { return values_[i]; }

    /// Nearest code by binary search; ties go to the smaller index. x must be finite.
    [[nodiscard]] std::uint8_t nearest(float x) const noexcept;
    [[nodiscard]] std::uint8_t zero_index() const noexcept { return zero_index_; }
    /// Largest distance between adjacent codes.
    [[nodiscard]] float max_gap() const noexcept;

    friend bool operator==(const Codebook&, const Codebook&) = default;

private:
    Codebook(CodebookKind kind, int bits, std::vector<float> values);

    CodebookKind kind_;
    int bits_;
    std::vector<float> values_;
    std::uint8_t zero_index_ = 0;
};

/// Nearest-code index for an already normalized value; throws on non-finite x.
std::uint8_t lookup_index(const Codebook& codebook, float x);

// Integer --------------------------------------------------------------------

/// The 2^k - 1 symmetric values j / (2^(k-1) - 1).
Codebook build_int_codebook(int bits);

/// Unsigned k-bit map: index / (2^k - 1).
double unsigned_int_value(int bits, std::uint32_t index);

// Float ----------------------------------------------------------------------

struct FloatSpec {
    int total_bits = 4;
    int exponent_bits = 2;
    int bias = 2;

    /// Bias 2^(E-1); any bias gives the same normalized codebook.
    static FloatSpec with_default_bias(int total_bits, int exponent_bits);
    [[nodiscard]] int mantissa_bits() const noexcept { return total_bits - 1 - exponent_bits; }
};

Codebook build_float_codebook(const FloatSpec& spec);

/// 2 exponent bits for 3-5 bit floats, 3 for 6-8 bits.
int default_exponent_bits(int bits);
/// Alternative assignment: at least half the bits, rounded up (2,2,3,3,4,4 for k = 3..8).
int half_bits_exponent_heuristic(int bits);

// Dynamic exponent -----------------------------------------------------------

struct DynamicSpec {
    int total_bits = 8;
    double fraction_lo = 0.1;
    double fraction_hi = 0.9;
};

/// Sign bit, a run of z zero bits (exponent 10^-z), an indicator 1-bit, then
/// f = k - 2 - z linear fraction bits spanning [fraction_lo, fraction_hi].
/// A lone indicator bit (f == 0) denotes 10^-z; the all-zero pattern is 0.
Codebook build_dynamic_codebook(const DynamicSpec& spec);

// Quantile -------------------------------------------------------------------

/// Exact empirical quantile function over a sorted copy of the data.
class SortedSample {
public:
    explicit SortedSample(std::span<const float> data);

    /// Inverse empirical CDF with linear interpolation between order statistics.
    [[nodiscard]] double quantile(double p) const;
    [[nodiscard]] std::size_t size() const noexcept { return sorted_.size(); }
    [[nodiscard]] std::span<const double> sorted() const noexcept { return sorted_; }

private:
    std::vector<double> sorted_;
};

double estimate_quantile(std::span<const float> data, double p);

struct QuantileSpec {
    int total_bits = 4;
    std::span<const float> sample;
};

/// Edges Q(i / (2^k + 1)) for i = 0 .. 2^k of the equal-mass bins.
std::vector<double> quantile_bin_edges(const std::function<double(double)>& quantile_fn, int bits);

/// Raw codebook values q_i = (Q(i/(2^k+1)) + Q((i+1)/(2^k+1))) / 2, i = 0 .. 2^k - 1,
/// before zero augmentation and normalization.
std::vector<double> quantile_midpoints(const std::function<double(double)>& quantile_fn, int bits);

/// Midpoints computed on the absmax-normalized sample, with 0 added. When no
/// midpoint is exactly zero, the midpoint closest to zero becomes zero so the
/// set still fits in 2^k codes.
Codebook build_quantile_codebook(const QuantileSpec& spec);

}  // namespace kbitq
