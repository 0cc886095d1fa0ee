// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/controller/controller.hpp"

#include "modelci/error.hpp"

namespace modelci::controller {

Controller::Controller(ControllerConfig config, ControllerHooks hooks)
    : config_(config), hooks_(std::move(hooks)), scheduler_(config) {
    loop_ = std::thread([this] { run(); });
}

Controller::~Controller() { stop(); }

void Controller::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    if (loop_.joinable() && loop_.get_id() != std::this_thread::get_id()) loop_.join();
}

void Controller::post(Message m) {
    {
        std::lock_guard lock(mu_);
        if (stopping_) return;
        queue_.push_back(std::move(m));
    }
    cv_.notify_one();
}

template <typename T>
T Controller::ask(std::function<T(Scheduler&)> f) {
    auto promise = std::make_shared<std::promise<T>>();
    auto future = promise->get_future();
    {
        std::lock_guard lock(mu_);
        if (stopping_) throw Error(ErrorCode::Internal, "controller stopped");
        queue_.push_back([promise, f = std::move(f)](Scheduler& s) {
            try {
                if constexpr (std::is_void_v<T>) {
                    f(s);
                    promise->set_value();
                } else {
                    promise->set_value(f(s));
                }
            } catch (...) {
                promise->set_exception(std::current_exception());
            }
        });
    }
    cv_.notify_one();
    return future.get();
}

void Controller::run() {
    for (;;) {
        Message m;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            m = std::move(queue_.front());
            queue_.pop_front();
        }
        m(scheduler_);
    }
}

void Controller::apply(const std::vector<SchedulingAction>& actions, const std::vector<PlacementRequest>& pending) {
    for (const auto& a : actions) {
        switch (a.kind) {
            case ActionKind::StartCell:
                if (hooks_.start_cell) hooks_.start_cell(a.ref, *a.cell);
                break;
            case ActionKind::PauseJob:
                if (hooks_.pause_job) hooks_.pause_job(a.ref);
                break;
            case ActionKind::ResumeJob:
                if (hooks_.resume_job) hooks_.resume_job(a.ref);
                break;
            case ActionKind::PlaceInstance:
                if (!hooks_.place_instance) break;
                for (const auto& p : pending) {
                    if (p.id == a.ref) hooks_.place_instance(p, a.device);
                }
                break;
        }
    }
}

void Controller::post_snapshot(telemetry::DeviceSnapshot snapshot) {
    post([this, snapshot = std::move(snapshot)](Scheduler& s) {
        s.on_snapshot(snapshot);
        const auto pending = s.pending_placements();
        const auto actions = s.tick();
        apply(actions, pending);
        if (!hooks_.job_state) return;
        for (auto it = reported_.begin(); it != reported_.end();) {
            auto now = s.job_state(it->first);
            if (!now) {
                it = reported_.erase(it);
                continue;
            }
            if (*now != it->second) {
                it->second = *now;
                hooks_.job_state(it->first, *now);
            }
            ++it;
        }
    });
}

void Controller::post_instance_load(const std::string& device, double fraction) {
    post([device, fraction](Scheduler& s) { s.on_instance_load(device, fraction); });
}

void Controller::cell_finished(const std::string& job_id, const profiler::CellKey& cell) {
    post([job_id, cell](Scheduler& s) { s.on_cell_finished(job_id, cell); });
}

void Controller::cancel(const std::string& job_id) {
    post([job_id](Scheduler& s) { s.cancel(job_id); });
}

void Controller::submit(JobTicket job) {
    ask<void>([this, job = std::move(job)](Scheduler& s) mutable {
        const auto id = job.id;
        s.submit(std::move(job));
        if (auto st = s.job_state(id)) reported_[id] = *st;
    });
}

void Controller::request_placement(PlacementRequest request) {
    ask<void>([request = std::move(request)](Scheduler& s) { s.request_placement(request); });
}

nlohmann::json Controller::status() {
    return ask<nlohmann::json>([](Scheduler& s) { return s.status(); });
}

std::optional<TicketState> Controller::job_state(const std::string& job_id) {
    return ask<std::optional<TicketState>>([job_id](Scheduler& s) { return s.job_state(job_id); });
}

void Controller::sync() {
    ask<void>([](Scheduler&) {});
}

}  // namespace modelci::controller
