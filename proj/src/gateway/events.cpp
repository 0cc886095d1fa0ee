// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/gateway/events.hpp"

#include <algorithm>

namespace modelci::gateway {

std::string format_sse(const Event& e) {
    // dump() never emits raw newlines, so one data line suffices.
    return "id: " + std::to_string(e.id) + "\nevent: " + e.type + "\ndata: " + e.data.dump() + "\n\n";
}

std::optional<Event> EventStream::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    Event e = std::move(queue_.front());
    queue_.pop_front();
    return e;
}

std::size_t EventStream::dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

void EventStream::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

EventBus::EventBus(std::size_t history, std::size_t stream_capacity)
    : history_size_(history), stream_capacity_(stream_capacity) {}

Event EventBus::publish(const std::string& type, nlohmann::json data) {
    std::lock_guard lock(mu_);
    Event e{next_id_++, type, std::move(data)};
    history_.push_back(e);
    while (history_.size() > history_size_) history_.pop_front();
    for (const auto& s : streams_) {
        {
            std::lock_guard slock(s->mu_);
            if (s->closed_) continue;
            s->queue_.push_back(e);
            while (s->queue_.size() > s->capacity_) {
                s->queue_.pop_front();
                ++s->dropped_;
            }
        }
        s->cv_.notify_one();
    }
    return e;
}

std::shared_ptr<EventStream> EventBus::subscribe(std::optional<std::uint64_t> last_id) {
    std::shared_ptr<EventStream> s(new EventStream(stream_capacity_));
    std::lock_guard lock(mu_);
    if (last_id) {
        for (const auto& e : history_) {
            if (e.id > *last_id) s->queue_.push_back(e);
        }
    }
    streams_.push_back(s);
    return s;
}

void EventBus::unsubscribe(const std::shared_ptr<EventStream>& stream) {
    stream->close();
    std::lock_guard lock(mu_);
    std::erase(streams_, stream);
}

void EventBus::close_all() {
    std::vector<std::shared_ptr<EventStream>> streams;
    {
        std::lock_guard lock(mu_);
        streams.swap(streams_);
    }
    for (const auto& s : streams) s->close();
}

std::vector<Event> EventBus::history() const {
    std::lock_guard lock(mu_);
    return {history_.begin(), history_.end()};
}

}  // namespace modelci::gateway
