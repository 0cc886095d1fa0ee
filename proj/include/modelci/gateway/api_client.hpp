// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modelci/error.hpp"
#include "modelci/gateway/events.hpp"

namespace modelci::gateway {

struct ApiResponse {
    int status = 0;
    std::string body;
    std::string content_type;
    bool replayed = false;  // served from the idempotency cache

    bool ok() const noexcept { return status >= 200 && status < 300; }
    nlohmann::json json() const;
};

// Rebuilds the server-side Error from an error response. Throws it.
[[noreturn]] void raise_api_error(const ApiResponse& response);

// Incremental parser for a text/event-stream body.
class SseParser {
public:
    std::vector<Event> feed(std::string_view chunk);

private:
    std::string buffer_;
    Event pending_;
    bool has_data_ = false;
};

// Thin HTTP client for the daemon. Transport failures raise
// Error(RequestFailure); HTTP error statuses are returned, not thrown.
class ApiClient {
public:
    explicit ApiClient(const std::string& base_url,
                       std::chrono::milliseconds timeout = std::chrono::milliseconds(300000));
    ~ApiClient();
    ApiClient(const ApiClient&) = delete;
    ApiClient& operator=(const ApiClient&) = delete;

    using Headers = std::map<std::string, std::string>;

    ApiResponse get(const std::string& path, const Headers& headers = {});
    ApiResponse post(const std::string& path, const nlohmann::json& body, const Headers& headers = {});
    ApiResponse patch(const std::string& path, const nlohmann::json& body, const Headers& headers = {});
    ApiResponse del(const std::string& path, const Headers& headers = {});
    ApiResponse register_model(const std::string& manifest_yaml, const std::string& weights,
                               const Headers& headers = {});

    // Streams /api/events until on_event returns false or the stream ends.
    void events(std::optional<std::uint64_t> last_event_id, const std::function<bool(const Event&)>& on_event);

    const std::string& base_url() const noexcept { return base_url_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string base_url_;
};

// MODELCI_URL or the default bind address.
std::string default_api_url();

}  // namespace modelci::gateway
