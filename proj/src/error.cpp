#include "dreamloom/error.hpp"

namespace dreamloom {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::EmptyTitle: return "EmptyTitle";
    case ErrorCode::PositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::NotMetaphorical: return "NotMetaphorical";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::MissingSpec: return "MissingSpec";
    case ErrorCode::UnknownStory: return "UnknownStory";
    case ErrorCode::UnknownScene: return "UnknownScene";
    case ErrorCode::UnknownGeneration: return "UnknownGeneration";
    case ErrorCode::OrderViolation: return "OrderViolation";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::ProviderTimeout: return "ProviderTimeout";
    case ErrorCode::ProviderRejected: return "ProviderRejected";
    case ErrorCode::NotConfigured: return "NotConfigured";
    case ErrorCode::BadImagePayload: return "BadImagePayload";
    case ErrorCode::UndecodableImage: return "UndecodableImage";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::EmptyPalette: return "EmptyPalette";
    case ErrorCode::InvalidHex: return "InvalidHex";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CorruptBundle: return "CorruptBundle";
    case ErrorCode::UnsupportedSchema: return "UnsupportedSchema";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Unavailable: return "Unavailable";
    case ErrorCode::Internal: return "Internal";
    }
    return "Internal";
}

bool error_code_retryable(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ProviderTimeout:
    case ErrorCode::Unavailable:
    case ErrorCode::IoFailure:
        return true;
    default:
        return false;
    }
}

int error_code_http_status(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::UnknownStory:
    case ErrorCode::UnknownScene:
    case ErrorCode::UnknownGeneration:
    case ErrorCode::NotFound:
        return 404;
    case ErrorCode::OrderViolation:
        return 409;
    case ErrorCode::EmptyTitle:
    case ErrorCode::PositionOutOfRange:
    case ErrorCode::NotMetaphorical:
    case ErrorCode::InvalidSpec:
    case ErrorCode::MissingSpec:
    case ErrorCode::EmptyPalette:
    case ErrorCode::InvalidHex:
    case ErrorCode::CorruptBundle:
    case ErrorCode::UnsupportedSchema:
        return 422;
    case ErrorCode::InvalidRequest:
        return 400;
    case ErrorCode::UnparseableResponse:
    case ErrorCode::ProviderRejected:
    case ErrorCode::BadImagePayload:
    case ErrorCode::UndecodableImage:
    case ErrorCode::EmptyImage:
        return 502;
    case ErrorCode::ProviderTimeout:
        return 504;
    case ErrorCode::NotConfigured:
    case ErrorCode::Unavailable:
        return 503;
    case ErrorCode::InvalidTemplate:
    case ErrorCode::IoFailure:
    case ErrorCode::BindFailure:
    case ErrorCode::Internal:
        return 500;
    }
    return 500;
}

}  // namespace dreamloom
