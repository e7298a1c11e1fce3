// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>

namespace kbitq {

/// IEEE 754 binary16 value held as raw bits.
///
/// Conversion from float rounds to nearest, ties to even; values beyond the
/// largest finite half (65504) round to infinity as the standard requires.
struct Half {
    std::uint16_t bits = 0;

    static Half from_float(float value) noexcept;
    [[nodiscard]] float to_float() const noexcept;
    [[nodiscard]] bool is_finite() const noexcept { return (bits & 0x7C00u) != 0x7C00u; }

    friend constexpr bool operator==(Half, Half) = default;
};

inline constexpr float kHalfMax = 65504.0f;

/// Round a float through binary16 and back.
inline float round_to_half(float value) noexcept { return Half::from_float(value).to_float(); }

}  // namespace kbitq
