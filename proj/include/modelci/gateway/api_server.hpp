// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "modelci/error.hpp"
#include "modelci/gateway/platform.hpp"

namespace modelci::gateway {

// {"code": "NOT_FOUND", "message": ..., "details": {...}}
nlohmann::json error_body(const Error& e);

// Remembers responses of state-changing requests by Idempotency-Key.
// A retry with the same key and request replays the stored response; the
// same key with a different request, or while the first is still running,
// is a conflict.
class IdempotencyCache {
public:
    struct Stored {
        int status = 0;
        std::string body;
        std::string content_type;
    };
    enum class Outcome { Fresh, Replay, Mismatch, InFlight };

    explicit IdempotencyCache(std::size_t capacity = 4096) : capacity_(capacity) {}

    // Fresh reserves the key; the caller must then complete() or abandon().
    Outcome begin(const std::string& key, const std::string& fingerprint, Stored& replay);
    void complete(const std::string& key, Stored response);
    void abandon(const std::string& key);

private:
    struct Entry {
        std::string fingerprint;
        bool done = false;
        Stored response;
        std::uint64_t order = 0;
    };
    std::size_t capacity_;
    std::mutex mu_;
    std::map<std::string, Entry> entries_;
    std::uint64_t next_order_ = 0;
};

// The daemon's HTTP front: JSON REST endpoints, the server-sent event
// stream and the metrics exposition.
class ApiServer {
public:
    ApiServer(Platform& platform, std::string host, int port);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Returns the bound port. Throws Error(BindFailure).
    int start();
    void stop();
    int port() const noexcept { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace modelci::gateway
