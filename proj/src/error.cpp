// SPDX-License-Identifier: Apache-2.0
#include "kbitq/error.hpp"

namespace kbitq {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::PrecisionRange: return "precision-range";
        case Errc::InvalidSpec: return "invalid-spec";
        case Errc::EmptyInput: return "empty-input";
        case Errc::InvalidValue: return "invalid-value";
        case Errc::CorruptData: return "corrupt-data";
        case Errc::InvalidFraction: return "invalid-fraction";
        case Errc::InvalidIndex: return "invalid-index";
        case Errc::Dimension: return "dimension";
        case Errc::UndefinedCorrelation: return "undefined-correlation";
        case Errc::Parse: return "parse";
        case Errc::Length: return "length";
        case Errc::Format: return "format";
        case Errc::InsufficientData: return "insufficient-data";
        case Errc::OutOfRange: return "out-of-range";
        case Errc::DisjointDomain: return "disjoint-domain";
        case Errc::Io: return "io";
    }
    return "unknown";
}

}  // namespace kbitq
