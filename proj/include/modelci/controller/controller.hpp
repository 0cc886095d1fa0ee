// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <thread>

#include "modelci/controller/scheduler.hpp"

namespace modelci::controller {

// Callbacks run on the control loop thread. They must hand long work off
// (a started cell reports back through Controller::cell_finished).
struct ControllerHooks {
    std::function<void(const std::string& job_id, const profiler::CellKey& cell)> start_cell;
    std::function<void(const std::string& job_id)> pause_job;
    std::function<void(const std::string& job_id)> resume_job;
    std::function<void(const PlacementRequest& request, const std::string& device)> place_instance;
    // A job's scheduling state changed.
    std::function<void(const std::string& job_id, TicketState state)> job_state;
};

// Owns a Scheduler on a single loop thread. Everything else talks to it by
// message: each call enqueues work for the loop, and calls that need an
// answer wait for it. Snapshots trigger a tick.
class Controller {
public:
    Controller(ControllerConfig config, ControllerHooks hooks);
    ~Controller();

    Controller(const Controller&) = delete;
    Controller& operator=(const Controller&) = delete;

    void post_snapshot(telemetry::DeviceSnapshot snapshot);
    void post_instance_load(const std::string& device, double fraction);
    void cell_finished(const std::string& job_id, const profiler::CellKey& cell);
    void cancel(const std::string& job_id);

    // Acknowledged once the loop has taken the message; rethrows its errors.
    void submit(JobTicket job);
    void request_placement(PlacementRequest request);

    nlohmann::json status();
    std::optional<TicketState> job_state(const std::string& job_id);
    // Waits until every message posted so far has been handled.
    void sync();
    void stop();

    const ControllerConfig& config() const noexcept { return config_; }

private:
    using Message = std::function<void(Scheduler&)>;

    void post(Message m);
    template <typename T>
    T ask(std::function<T(Scheduler&)> f);
    void run();
    void apply(const std::vector<SchedulingAction>& actions, const std::vector<PlacementRequest>& pending);

    ControllerConfig config_;
    ControllerHooks hooks_;
    Scheduler scheduler_;  // touched only by the loop thread
    std::map<std::string, TicketState> reported_;

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Message> queue_;
    bool stopping_ = false;
    std::thread loop_;
};

}  // namespace modelci::controller
