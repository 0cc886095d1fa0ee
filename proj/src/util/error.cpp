// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/error.hpp"

namespace modelci {

std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotFound: return "NOT_FOUND";
        case ErrorCode::InvalidManifest: return "INVALID_MANIFEST";
        case ErrorCode::DuplicateVersion: return "DUPLICATE_VERSION";
        case ErrorCode::StorageFailure: return "STORAGE_FAILURE";
        case ErrorCode::IllegalTransition: return "ILLEGAL_TRANSITION";
        case ErrorCode::ImmutableField: return "IMMUTABLE_FIELD";
        case ErrorCode::Conflict: return "CONFLICT";
        case ErrorCode::InUse: return "IN_USE";
        case ErrorCode::UnknownDigest: return "UNKNOWN_DIGEST";
        case ErrorCode::DuplicatePlugin: return "DUPLICATE_PLUGIN";
        case ErrorCode::InvalidPlugin: return "INVALID_PLUGIN";
        case ErrorCode::UnsupportedConversion: return "UNSUPPORTED_CONVERSION";
        case ErrorCode::PluginFailure: return "PLUGIN_FAILURE";
        case ErrorCode::Timeout: return "TIMEOUT";
        case ErrorCode::InvalidModel: return "INVALID_MODEL";
        case ErrorCode::IncompatibleFormat: return "INCOMPATIBLE_FORMAT";
        case ErrorCode::UnknownDevice: return "UNKNOWN_DEVICE";
        case ErrorCode::LaunchFailure: return "LAUNCH_FAILURE";
        case ErrorCode::ReadyTimeout: return "READY_TIMEOUT";
        case ErrorCode::CellFailure: return "CELL_FAILURE";
        case ErrorCode::JobAborted: return "JOB_ABORTED";
        case ErrorCode::RequestFailure: return "REQUEST_FAILURE";
        case ErrorCode::EmptySamples: return "EMPTY_SAMPLES";
        case ErrorCode::EmptyTrace: return "EMPTY_TRACE";
        case ErrorCode::ProviderFailure: return "PROVIDER_FAILURE";
        case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
        case ErrorCode::BindFailure: return "BIND_FAILURE";
        case ErrorCode::IdempotencyConflict: return "IDEMPOTENCY_CONFLICT";
        case ErrorCode::Internal: return "INTERNAL";
    }
    return "INTERNAL";
}

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidManifest:
        case ErrorCode::InvalidArgument:
        case ErrorCode::InvalidPlugin:
        case ErrorCode::InvalidModel:
            return 400;
        case ErrorCode::NotFound:
        case ErrorCode::UnknownDigest:
            return 404;
        case ErrorCode::DuplicateVersion:
        case ErrorCode::IllegalTransition:
        case ErrorCode::Conflict:
        case ErrorCode::InUse:
        case ErrorCode::DuplicatePlugin:
        case ErrorCode::IdempotencyConflict:
            return 409;
        case ErrorCode::ImmutableField:
        case ErrorCode::UnsupportedConversion:
        case ErrorCode::IncompatibleFormat:
        case ErrorCode::UnknownDevice:
        case ErrorCode::EmptySamples:
        case ErrorCode::EmptyTrace:
            return 422;
        case ErrorCode::Timeout:
        case ErrorCode::ReadyTimeout:
        case ErrorCode::ProviderFailure:
        case ErrorCode::BindFailure:
            return 503;
        case ErrorCode::StorageFailure:
        case ErrorCode::PluginFailure:
        case ErrorCode::LaunchFailure:
        case ErrorCode::CellFailure:
        case ErrorCode::JobAborted:
        case ErrorCode::RequestFailure:
        case ErrorCode::Internal:
            return 500;
    }
    return 500;
}

std::optional<ErrorCode> parse_code(std::string_view name) noexcept {
    for (int i = 0; i <= static_cast<int>(ErrorCode::Internal); ++i) {
        const auto code = static_cast<ErrorCode>(i);
        if (code_name(code) == name) return code;
    }
    return std::nullopt;
}

}  // namespace modelci
