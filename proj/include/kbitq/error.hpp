// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kbitq {

enum class Errc {
    PrecisionRange,
    InvalidSpec,
    EmptyInput,
    InvalidValue,
    CorruptData,
    InvalidFraction,
    InvalidIndex,
    Dimension,
    UndefinedCorrelation,
    Parse,
    Length,
    Format,
    InsufficientData,
    OutOfRange,
    DisjointDomain,
    Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

    /// True for failures caused by malformed or corrupt input files.
    [[nodiscard]] bool is_data_format() const noexcept {
        return code_ == Errc::Parse || code_ == Errc::Length || code_ == Errc::Format ||
               code_ == Errc::CorruptData;
    }

private:
    Errc code_;
};

}  // namespace kbitq
