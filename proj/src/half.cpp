// SPDX-License-Identifier: Apache-2.0
#include "kbitq/half.hpp"

#include <bit>

namespace kbitq {

Half Half::from_float(float value) noexcept {
    const std::uint32_t f = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (f >> 16) & 0x8000u;
    const std::uint32_t exp = (f >> 23) & 0xFFu;
    std::uint32_t mant = f & 0x7FFFFFu;

    if (exp == 0xFFu) {
        // Inf stays Inf; NaN keeps a quiet payload bit.
        const std::uint16_t nan_bits = mant != 0 ? static_cast<std::uint16_t>(0x200u | (mant >> 13)) : 0;
        return Half{static_cast<std::uint16_t>(sign | 0x7C00u | nan_bits)};
    }

    const int unbiased = static_cast<int>(exp) - 127;
    if (unbiased > 15) {
        return Half{static_cast<std::uint16_t>(sign | 0x7C00u)};
    }

    if (unbiased >= -14) {
        // Normal half: keep 10 mantissa bits, round the dropped 13.
        std::uint32_t half_exp = static_cast<std::uint32_t>(unbiased + 15);
        std::uint32_t half_mant = mant >> 13;
        const std::uint32_t rest = mant & 0x1FFFu;
        if (rest > 0x1000u || (rest == 0x1000u && (half_mant & 1u))) {
            ++half_mant;
            if (half_mant == 0x400u) {
                half_mant = 0;
                ++half_exp;
            }
        }
        if (half_exp >= 31) {
            return Half{static_cast<std::uint16_t>(sign | 0x7C00u)};
        }
        return Half{static_cast<std::uint16_t>(sign | (half_exp << 10) | half_mant)};
    }

    // Subnormal half (or underflow to zero). Units of 2^-24.
    if (unbiased < -25) {
        return Half{static_cast<std::uint16_t>(sign)};
    }
    mant |= 0x800000u;  // implicit leading one
    // value / 2^-24 = mant * 2^(unbiased + 1), with unbiased in [-25, -15]
    const std::uint32_t rshift = static_cast<std::uint32_t>(-(unbiased + 1));
    std::uint32_t half_mant = mant >> rshift;
    const std::uint32_t rest = mant & ((1u << rshift) - 1u);
    const std::uint32_t halfway = 1u << (rshift - 1u);
    if (rest > halfway || (rest == halfway && (half_mant & 1u))) {
        ++half_mant;  // may carry into the smallest normal, which is the correct encoding
    }
    return Half{static_cast<std::uint16_t>(sign | half_mant)};
}

float Half::to_float() const noexcept {
    const std::uint32_t sign = (static_cast<std::uint32_t>(bits) & 0x8000u) << 16;
    const std::uint32_t exp = (bits >> 10) & 0x1Fu;
    std::uint32_t mant = bits & 0x3FFu;

    std::uint32_t out = 0;
    if (exp == 0x1Fu) {
        out = sign | 0x7F800000u | (mant << 13);
    } else if (exp != 0) {
        out = sign | ((exp + 112u) << 23) | (mant << 13);
    } else if (mant == 0) {
        out = sign;
    } else {
        // Renormalize the subnormal.
        std::uint32_t e = 113;
        while ((mant & 0x400u) == 0) {
            mant <<= 1;
            --e;
        }
        mant &= 0x3FFu;
        out = sign | (e << 23) | (mant << 13);
    }
    return std::bit_cast<float>(out);
}

}  // namespace kbitq
