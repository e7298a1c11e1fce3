// SPDX-License-Identifier: Apache-2.0
#include "kbitq/half.hpp"
#include "kbitq/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

using kbitq::Half;

namespace {

// Decodes binary16 straight from the bit fields.
double decode(std::uint16_t bits) {
    const int sign = bits >> 15;
    const int exp = (bits >> 10) & 0x1F;
    const int man = bits & 0x3FF;
    double v = 0.0;
    if (exp == 0) {
        v = std::ldexp(static_cast<double>(man), -24);
    } else if (exp == 31) {
        v = man == 0 ? HUGE_VAL : NAN;
    } else {
        v = std::ldexp(1024.0 + man, exp - 25);
    }
    return sign ? -v : v;
}

// Non-negative finite halves in increasing order (bit order equals value order).
std::vector<double> positive_halves() {
    std::vector<double> v;
    for (std::uint32_t b = 0; b < 0x7C00; ++b) v.push_back(decode(static_cast<std::uint16_t>(b)));
    return v;
}

// Nearest half by search over all finite values; ties pick the even pattern,
// and anything at or beyond 65520 overflows.
std::uint16_t oracle_round(float x) {
    static const std::vector<double> table = positive_halves();
    const double a = std::fabs(static_cast<double>(x));
    const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
    if (a >= 65520.0) return sign | 0x7C00;
    auto it = std::lower_bound(table.begin(), table.end(), a);
    std::size_t hi = static_cast<std::size_t>(it - table.begin());
    if (hi == table.size()) hi = table.size() - 1;
    if (table[hi] == a) return static_cast<std::uint16_t>(sign | hi);
    const std::size_t lo = hi - 1;
    const double dlo = a - table[lo];
    const double dhi = table[hi] - a;
    std::size_t pick = dlo < dhi ? lo : (dhi < dlo ? hi : (lo % 2 == 0 ? lo : hi));
    return static_cast<std::uint16_t>(sign | pick);
}

}  // namespace

TEST(Half, DecodesEveryPattern) {
    for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
        const Half h{static_cast<std::uint16_t>(b)};
        const double want = decode(h.bits);
        if (std::isnan(want)) {
            EXPECT_TRUE(std::isnan(h.to_float()));
            EXPECT_FALSE(h.is_finite());
        } else {
            EXPECT_EQ(static_cast<double>(h.to_float()), want) << std::hex << b;
        }
    }
}

TEST(Half, FiniteValuesRoundTrip) {
    for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
        const Half h{static_cast<std::uint16_t>(b)};
        if ((b & 0x7C00) == 0x7C00) continue;
        EXPECT_EQ(Half::from_float(h.to_float()).bits, h.bits) << std::hex << b;
    }
}

TEST(Half, TiesGoToEven) {
    // Midpoint between 1 and the next half (1 + 2^-10) rounds down to 1.
    EXPECT_EQ(Half::from_float(1.0f + std::ldexp(1.0f, -11)).bits, 0x3C00);
    // Midpoint between 1 + 2^-10 and 1 + 2^-9 rounds up to the even mantissa.
    EXPECT_EQ(Half::from_float(1.0f + 3 * std::ldexp(1.0f, -11)).bits, 0x3C02);
    EXPECT_EQ(Half::from_float(std::ldexp(1.0f, -25)).bits, 0x0000);
    EXPECT_EQ(Half::from_float(3 * std::ldexp(1.0f, -25)).bits, 0x0002);
    EXPECT_EQ(Half::from_float(std::ldexp(1.0f, -24)).bits, 0x0001);
}

TEST(Half, Overflow) {
    EXPECT_EQ(Half::from_float(65504.0f).bits, 0x7BFF);
    EXPECT_EQ(Half::from_float(65519.0f).bits, 0x7BFF);
    EXPECT_EQ(Half::from_float(65520.0f).bits, 0x7C00);
    EXPECT_EQ(Half::from_float(-1e9f).bits, 0xFC00);
    EXPECT_FALSE(Half::from_float(1e9f).is_finite());
}

TEST(Half, MatchesNearestSearchOnMidpoints) {
    const auto table = positive_halves();
    for (std::size_t i = 0; i + 1 < table.size(); ++i) {
        const auto mid = static_cast<float>((table[i] + table[i + 1]) / 2);
        ASSERT_EQ(Half::from_float(mid).bits, oracle_round(mid)) << mid;
        ASSERT_EQ(Half::from_float(-mid).bits, oracle_round(-mid)) << -mid;
    }
}

TEST(Half, MatchesNearestSearchOnRandomFloats) {
    const kbitq::CounterRng rng(7);
    for (std::uint64_t i = 0; i < 200000; ++i) {
        // Random bit patterns cover every exponent; restrict to the region half can touch.
        auto bits = static_cast<std::uint32_t>(rng.bits(i));
        const float x = std::bit_cast<float>(bits);
        if (!std::isfinite(x) || std::fabs(x) > 1e6f) continue;
        ASSERT_EQ(Half::from_float(x).bits, oracle_round(x)) << x;
    }
}
