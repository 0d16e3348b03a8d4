#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace timefuse {

enum class ErrorKind {
    WindowTooShort,
    NonFiniteInput,
    LagTooLarge,
    ShapeMismatch,
    DuplicateModelName,
    RosterMismatch,
    EmptyDataset,
    EmptySubset,
    NonFiniteLoss,
    KOutOfRange,
    InvalidParameter,
    UnknownTask,
    InsufficientTasks,
    UnknownMethod,
    FormatError,
    TruncatedFile,
    ChecksumMismatch,
    IoError,
    ParseError,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::WindowTooShort: return "WindowTooShort";
        case ErrorKind::NonFiniteInput: return "NonFiniteInput";
        case ErrorKind::LagTooLarge: return "LagTooLarge";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::DuplicateModelName: return "DuplicateModelName";
        case ErrorKind::RosterMismatch: return "RosterMismatch";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::EmptySubset: return "EmptySubset";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::KOutOfRange: return "KOutOfRange";
        case ErrorKind::InvalidParameter: return "InvalidParameter";
        case ErrorKind::UnknownTask: return "UnknownTask";
        case ErrorKind::InsufficientTasks: return "InsufficientTasks";
        case ErrorKind::UnknownMethod: return "UnknownMethod";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::TruncatedFile: return "TruncatedFile";
        case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace timefuse
