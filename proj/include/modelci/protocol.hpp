// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <string>
#include <string_view>

#include "modelci/error.hpp"

namespace modelci {

// Service protocols a backend can expose. GrpcStyle is a minimal
// length-prefixed TCP protocol (see mockserve/wire.hpp).
enum class Protocol { Rest, GrpcStyle };

inline std::string_view to_string(Protocol p) noexcept {
    return p == Protocol::Rest ? "rest" : "grpc-style";
}

inline Protocol parse_protocol(std::string_view text) {
    if (text == "rest") return Protocol::Rest;
    if (text == "grpc-style" || text == "grpc") return Protocol::GrpcStyle;
    throw Error(ErrorCode::InvalidArgument, "unknown protocol '" + std::string(text) + "'");
}

struct Endpoint {
    std::string host = "127.0.0.1";
    int port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
    bool operator==(const Endpoint&) const = default;
};

}  // namespace modelci
