#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace holo {

enum class ErrorCode {
    DimensionMismatch,
    InvalidGeometry,
    InvalidField,
    NegativeIntensity,
    ZeroMean,
    AllZero,
    TooSmall,
    NoContrast,
    HeightsOutOfOrder,
    NonFiniteField,
    InvalidSpec,
    IoError,
    CorruptFile,
    NoPeak,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::NegativeIntensity: return "NegativeIntensity";
    case ErrorCode::ZeroMean: return "ZeroMean";
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::NoContrast: return "NoContrast";
    case ErrorCode::HeightsOutOfOrder: return "HeightsOutOfOrder";
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::NoPeak: return "NoPeak";
    }
    return "Unknown";
}

/// Every failure raised by the library. The code identifies the failure
/// class; the message carries the offending field or path.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

    /// Validation errors are caller mistakes (bad parameters); everything
    /// else is a runtime failure.
    bool is_validation() const noexcept
    {
        return code_ == ErrorCode::InvalidSpec || code_ == ErrorCode::InvalidGeometry;
    }

private:
    ErrorCode code_;
};

} // namespace holo
