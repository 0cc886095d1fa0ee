// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace modelci::gateway {

struct Event {
    std::uint64_t id = 0;
    std::string type;
    nlohmann::json data;
};

// "id: N\nevent: type\ndata: <json>\n\n"
std::string format_sse(const Event& e);

class EventBus;

// One reader's view of the bus. Slow readers lose their oldest events.
class EventStream {
public:
    std::optional<Event> next(std::chrono::milliseconds timeout);
    std::size_t dropped() const;
    void close();

private:
    friend class EventBus;
    explicit EventStream(std::size_t capacity) : capacity_(capacity) {}

    const std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Event> queue_;
    std::size_t dropped_ = 0;
    bool closed_ = false;
};

// Fan-out of daemon events with a short replay history for reconnecting
// clients (Last-Event-ID).
class EventBus {
public:
    explicit EventBus(std::size_t history = 512, std::size_t stream_capacity = 1024);

    Event publish(const std::string& type, nlohmann::json data);
    // Events after `last_id` still in the history are queued first.
    std::shared_ptr<EventStream> subscribe(std::optional<std::uint64_t> last_id = std::nullopt);
    void unsubscribe(const std::shared_ptr<EventStream>& stream);
    void close_all();
    std::vector<Event> history() const;

private:
    const std::size_t history_size_;
    const std::size_t stream_capacity_;
    mutable std::mutex mu_;
    std::uint64_t next_id_ = 1;
    std::deque<Event> history_;
    std::vector<std::shared_ptr<EventStream>> streams_;
};

}  // namespace modelci::gateway
