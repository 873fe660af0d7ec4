#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace editprop {

enum class ErrorCode {
    MalformedDiff,
    InvalidAnchor,
    StaleEdit,
    InvalidEdit,
    InsufficientNegatives,
    BackendUnavailable,
    NoCandidate,
    WindowTooLarge,
    RegionTooLarge,
    RevisionMismatch,
    PreconditionFailed,
    NotFound,
    EmptyGroundTruth,
    CoverageMismatch,
    EmptyReference,
    ConfigError,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedDiff: return "MalformedDiff";
    case ErrorCode::InvalidAnchor: return "InvalidAnchor";
    case ErrorCode::StaleEdit: return "StaleEdit";
    case ErrorCode::InvalidEdit: return "InvalidEdit";
    case ErrorCode::InsufficientNegatives: return "InsufficientNegatives";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::NoCandidate: return "NoCandidate";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::RegionTooLarge: return "RegionTooLarge";
    case ErrorCode::RevisionMismatch: return "RevisionMismatch";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::CoverageMismatch: return "CoverageMismatch";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Base of every error raised by the library. `code()` is what the HTTP
/// layer and the CLI switch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class MalformedDiff : public Error {
public:
    MalformedDiff(std::size_t line_no, const std::string& reason)
        : Error(ErrorCode::MalformedDiff, "line " + std::to_string(line_no) + ": " + reason),
          line_no_(line_no), reason_(reason) {}

    std::size_t line_no() const noexcept { return line_no_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_no_;
    std::string reason_;
};

class InsufficientNegatives : public Error {
public:
    InsufficientNegatives(std::size_t requested, std::size_t available)
        : Error(ErrorCode::InsufficientNegatives,
                "requested " + std::to_string(requested) + " negatives, " +
                    std::to_string(available) + " available"),
          requested_(requested), available_(available) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t available() const noexcept { return available_; }

private:
    std::size_t requested_;
    std::size_t available_;
};

} // namespace editprop
