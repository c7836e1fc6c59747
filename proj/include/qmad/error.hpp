#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qmad {

enum class ErrorKind {
    InvalidArgument,
    EmptyPopulation,
    ParseError,
    DuplicateSample,
    EmptyBonaFide,
    UnknownEstimator,
    NonFiniteScore,
    DecodeError,
    UnsupportedFormat,
    CoverageBelowFloor,
    ImageTooSmall,
    ModelMismatch,
    SampleSetMismatch,
    ZeroVariancePair,
    Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyPopulation: return "EmptyPopulation";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateSample: return "DuplicateSample";
    case ErrorKind::EmptyBonaFide: return "EmptyBonaFide";
    case ErrorKind::UnknownEstimator: return "UnknownEstimator";
    case ErrorKind::NonFiniteScore: return "NonFiniteScore";
    case ErrorKind::DecodeError: return "DecodeError";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CoverageBelowFloor: return "CoverageBelowFloor";
    case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    case ErrorKind::ModelMismatch: return "ModelMismatch";
    case ErrorKind::SampleSetMismatch: return "SampleSetMismatch";
    case ErrorKind::ZeroVariancePair: return "ZeroVariancePair";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what)
        , kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace qmad
