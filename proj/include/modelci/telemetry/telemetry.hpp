// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "modelci/telemetry/provider.hpp"
#include "modelci/telemetry/types.hpp"

namespace modelci::telemetry {

// A consumer's view of the snapshot stream. The producer never blocks: when
// the buffer is full the oldest snapshot is discarded.
class Subscription {
public:
    Subscription(std::chrono::milliseconds interval, std::size_t capacity);

    // Waits up to `timeout` for the next snapshot.
    std::optional<DeviceSnapshot> next(std::chrono::milliseconds timeout);
    std::size_t dropped() const;
    std::chrono::milliseconds interval() const noexcept { return interval_; }
    void close();
    bool closed() const;

private:
    friend class Telemetry;
    void push(const DeviceSnapshot& snapshot);

    const std::chrono::milliseconds interval_;
    const std::size_t capacity_;
    std::chrono::steady_clock::time_point next_due_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<DeviceSnapshot> queue_;
    std::size_t dropped_ = 0;
    bool closed_ = false;
};

struct TelemetryOptions {
    // Cadence of the background sampler when no subscriber needs faster.
    std::chrono::milliseconds interval{1000};
    std::size_t subscriber_capacity = 16;
};

class Telemetry {
public:
    Telemetry(std::shared_ptr<DeviceProvider> provider, TelemetryOptions options = {},
              std::filesystem::path proc_root = "/proc");
    ~Telemetry();
    Telemetry(const Telemetry&) = delete;
    Telemetry& operator=(const Telemetry&) = delete;

    // Starts the background sampler (idempotent).
    void start();
    void stop();

    // Samples the provider now. On ProviderFailure the previous snapshot is
    // returned with stale=true (an empty one if nothing was sampled yet).
    DeviceSnapshot sample_devices();
    // Most recent snapshot; samples once if none exists yet.
    DeviceSnapshot latest();
    bool device_known(const std::string& device);

    // Interval must be >= 10 ms; throws Error(InvalidArgument).
    std::shared_ptr<Subscription> subscribe(std::chrono::milliseconds interval);

    void track_instance(const std::string& instance_id, int pid);
    void untrack_instance(const std::string& instance_id);
    // Throws Error(NotFound) for untracked instances or exited processes.
    InstanceStats sample_instance(const std::string& instance_id);

    // Latest device and instance samples in the plain-text metrics
    // exposition format.
    std::string exposition();

private:
    struct Tracked {
        int pid = 0;
        std::optional<ProcessStatsReader::Raw> last_raw;
        std::chrono::steady_clock::time_point last_at;
        InstanceStats last_stats;
        bool sampled = false;
    };

    void run(std::stop_token stop);
    void sample_tracked_instances();

    std::shared_ptr<DeviceProvider> provider_;
    TelemetryOptions options_;
    ProcessStatsReader reader_;

    std::mutex snapshot_mu_;
    std::optional<DeviceSnapshot> latest_;
    std::uint64_t sequence_ = 0;

    std::mutex subs_mu_;
    std::condition_variable_any subs_cv_;
    std::vector<std::shared_ptr<Subscription>> subscribers_;

    std::mutex instances_mu_;
    std::map<std::string, Tracked> instances_;

    std::jthread sampler_;
};

std::string render_exposition(const DeviceSnapshot& devices, const std::vector<InstanceStats>& instances);

}  // namespace modelci::telemetry
