// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace modelci {

// Every failure a module can report. Each code maps to exactly one wire name
// and one HTTP status in the gateway.
enum class ErrorCode {
    NotFound,
    InvalidManifest,
    DuplicateVersion,
    StorageFailure,
    IllegalTransition,
    ImmutableField,
    Conflict,
    InUse,
    UnknownDigest,
    DuplicatePlugin,
    InvalidPlugin,
    UnsupportedConversion,
    PluginFailure,
    Timeout,
    InvalidModel,
    IncompatibleFormat,
    UnknownDevice,
    LaunchFailure,
    ReadyTimeout,
    CellFailure,
    JobAborted,
    RequestFailure,
    EmptySamples,
    EmptyTrace,
    ProviderFailure,
    InvalidArgument,
    BindFailure,
    IdempotencyConflict,
    Internal,
};

std::string_view code_name(ErrorCode code) noexcept;
int http_status(ErrorCode code) noexcept;
// Inverse of code_name.
std::optional<ErrorCode> parse_code(std::string_view name) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::map<std::string, std::string> details = {})
        : std::runtime_error(message), code_(code), details_(std::move(details)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::map<std::string, std::string>& details() const noexcept { return details_; }

private:
    ErrorCode code_;
    std::map<std::string, std::string> details_;
};

}  // namespace modelci
