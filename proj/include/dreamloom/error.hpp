#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dreamloom {

// Frozen public enum. Each value serializes to a stable machine string
// (see error_code_name) that the HTTP API and CLI report verbatim.
enum class ErrorCode {
    EmptyTitle,
    PositionOutOfRange,
    NotMetaphorical,
    InvalidSpec,
    MissingSpec,
    UnknownStory,
    UnknownScene,
    UnknownGeneration,
    OrderViolation,
    InvalidRequest,
    UnparseableResponse,
    ProviderTimeout,
    ProviderRejected,
    NotConfigured,
    BadImagePayload,
    UndecodableImage,
    EmptyImage,
    EmptyPalette,
    InvalidHex,
    InvalidTemplate,
    IoFailure,
    CorruptBundle,
    UnsupportedSchema,
    BindFailure,
    NotFound,
    Unavailable,
    Internal,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Whether a caller may reasonably retry the same request unchanged.
bool error_code_retryable(ErrorCode code) noexcept;

/// HTTP status used when the error crosses the API boundary.
int error_code_http_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dreamloom
