// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "modelci/protocol.hpp"

namespace modelci {

// Talks to a serving endpoint over either protocol through one persistent
// connection. Not thread-safe; use one client per concurrent stream.
class ServiceClient {
public:
    ServiceClient(Endpoint endpoint, Protocol protocol,
                  std::chrono::milliseconds connect_timeout = std::chrono::milliseconds(1000),
                  std::chrono::milliseconds io_timeout = std::chrono::milliseconds(30000));
    ~ServiceClient();
    ServiceClient(const ServiceClient&) = delete;
    ServiceClient& operator=(const ServiceClient&) = delete;

    struct Response {
        int status = 0;  // HTTP-equivalent status
        std::string body;
    };

    // nullopt on transport failure (refused, reset, timed out).
    std::optional<Response> predict(const std::string& body);
    std::optional<Response> health();

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

// Builds {"inputs": [[...] x batch]} with a deterministic input pattern.
std::string make_predict_body(int batch_size, int input_dim);

}  // namespace modelci
