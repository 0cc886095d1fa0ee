// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/controller/scheduler.hpp"

#include <algorithm>

#include "modelci/error.hpp"

namespace modelci::controller {

using json = nlohmann::json;

void ControllerConfig::validate() const {
    if (!(idle_threshold > 0.0 && idle_threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "idle_threshold must be in (0, 1]",
                    {{"idle_threshold", std::to_string(idle_threshold)}});
    }
    if (consecutive_samples < 1) {
        throw Error(ErrorCode::InvalidArgument, "consecutive_samples must be at least 1",
                    {{"consecutive_samples", std::to_string(consecutive_samples)}});
    }
}

std::string_view to_string(ActionKind kind) noexcept {
    switch (kind) {
        case ActionKind::StartCell: return "start_cell";
        case ActionKind::PauseJob: return "pause_job";
        case ActionKind::ResumeJob: return "resume_job";
        case ActionKind::PlaceInstance: return "place_instance";
    }
    return "unknown";
}

std::string_view to_string(TicketState s) noexcept {
    switch (s) {
        case TicketState::Queued: return "queued";
        case TicketState::WaitingForDevice: return "waiting_for_device";
        case TicketState::Running: return "running";
        case TicketState::Paused: return "paused";
    }
    return "unknown";
}

void to_json(json& j, const SchedulingAction& a) {
    j = json{{"kind", to_string(a.kind)}, {"ref", a.ref}, {"device", a.device}};
    if (a.cell) j["cell"] = a.cell->str();
}

Scheduler::Scheduler(ControllerConfig config) : config_(config) { config_.validate(); }

void Scheduler::on_snapshot(const telemetry::DeviceSnapshot& snapshot) {
    if (snapshot.stale) {
        // Re-served data says nothing new; nothing may be judged idle on it.
        for (auto& [_, d] : devices_) d.stale = true;
        return;
    }
    for (auto& [id, d] : devices_) {
        if (!snapshot.devices.contains(id)) d.stale = true;
    }
    const auto k = static_cast<std::size_t>(config_.consecutive_samples);
    for (const auto& [id, stats] : snapshot.devices) {
        auto& d = devices_[id];
        d.stale = false;
        d.window.push_back({stats.utilization, d.running_job ? d.self_load : 0.0});
        while (d.window.size() > k) d.window.pop_front();
    }
}

void Scheduler::on_instance_load(const std::string& device, double fraction) {
    auto it = devices_.find(device);
    if (it == devices_.end() || !it->second.running_job) return;
    it->second.self_load = std::max(0.0, fraction);
}

void Scheduler::submit(JobTicket job) {
    if (jobs_.contains(job.id)) {
        throw Error(ErrorCode::Conflict, "job already submitted", {{"job_id", job.id}});
    }
    if (job.remaining.empty()) return;
    Job entry;
    entry.state = job.paused ? TicketState::Paused : TicketState::Queued;
    entry.started = job.paused;
    const auto id = job.id;
    entry.ticket = std::move(job);
    jobs_.emplace(id, std::move(entry));
}

void Scheduler::request_placement(PlacementRequest request) {
    const auto pos = std::upper_bound(placements_.begin(), placements_.end(), request,
                                      [](const auto& a, const auto& b) { return a.sequence < b.sequence; });
    placements_.insert(pos, std::move(request));
}

void Scheduler::on_cell_finished(const std::string& job_id, const profiler::CellKey& cell) {
    if (auto d = devices_.find(cell.device); d != devices_.end() && d->second.running_job == job_id) {
        d->second.running_job.reset();
        d->second.self_load = 0;
    }
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return;
    auto& job = it->second;
    std::erase(job.ticket.remaining, cell);
    job.device.reset();
    job.last_device = cell.device;
    if (job.ticket.remaining.empty()) jobs_.erase(it);
}

void Scheduler::cancel(const std::string& job_id) {
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return;
    if (it->second.device) {
        auto& d = devices_[*it->second.device];
        if (d.running_job == job_id) {
            d.running_job.reset();
            d.self_load = 0;
        }
    }
    jobs_.erase(it);
}

bool Scheduler::idle(const DeviceState& d) const {
    if (d.stale || d.running_job) return false;
    if (d.window.size() < static_cast<std::size_t>(config_.consecutive_samples)) return false;
    return std::all_of(d.window.begin(), d.window.end(), [&](const Sample& s) {
        return s.utilization - s.self_load < config_.idle_threshold;
    });
}

bool Scheduler::busy(const DeviceState& d) const {
    if (d.stale || d.window.size() < static_cast<std::size_t>(config_.consecutive_samples)) return false;
    return std::all_of(d.window.begin(), d.window.end(), [&](const Sample& s) {
        return s.utilization - s.self_load > config_.idle_threshold;
    });
}

bool Scheduler::is_idle(const std::string& device) const {
    auto it = devices_.find(device);
    return it != devices_.end() && idle(it->second);
}

bool Scheduler::is_stale(const std::string& device) const {
    auto it = devices_.find(device);
    return it == devices_.end() || it->second.stale;
}

std::vector<double> Scheduler::samples(const std::string& device) const {
    std::vector<double> out;
    if (auto it = devices_.find(device); it != devices_.end()) {
        for (const auto& s : it->second.window) out.push_back(s.utilization);
    }
    return out;
}

std::vector<SchedulingAction> Scheduler::tick() {
    std::vector<SchedulingAction> actions;

    std::vector<Job*> fifo;
    for (auto& [_, job] : jobs_) fifo.push_back(&job);
    std::sort(fifo.begin(), fifo.end(), [](const Job* a, const Job* b) {
        if (a->ticket.sequence != b->ticket.sequence) return a->ticket.sequence < b->ticket.sequence;
        return a->ticket.id < b->ticket.id;
    });

    // Preemption first. A paused job's running cell finishes; the job then
    // gets no further cells until a device is idle again.
    std::set<std::string> paused_now;
    for (Job* job : fifo) {
        if (job->state != TicketState::Running) continue;
        const auto& where = job->device ? job->device : job->last_device;
        if (!where) continue;
        auto d = devices_.find(*where);
        if (d == devices_.end() || !busy(d->second)) continue;
        job->state = TicketState::Paused;
        job->ticket.paused = true;
        paused_now.insert(job->ticket.id);
        actions.push_back({ActionKind::PauseJob, job->ticket.id, *where, std::nullopt});
    }

    for (auto& [device, d] : devices_) {
        if (!idle(d)) continue;
        for (Job* job : fifo) {
            if (job->device || paused_now.contains(job->ticket.id)) continue;
            const auto& cells = job->ticket.remaining;
            auto cell = std::find_if(cells.begin(), cells.end(), [&](const auto& c) { return c.device == device; });
            if (cell == cells.end()) continue;
            if (job->state == TicketState::Paused) {
                actions.push_back({ActionKind::ResumeJob, job->ticket.id, device, std::nullopt});
                job->ticket.paused = false;
            }
            actions.push_back({ActionKind::StartCell, job->ticket.id, device, *cell});
            job->state = TicketState::Running;
            job->started = true;
            job->device = device;
            d.running_job = job->ticket.id;
            d.self_load = 0;
            break;
        }
    }

    for (Job* job : fifo) {
        if (job->state == TicketState::Queued) job->state = TicketState::WaitingForDevice;
    }

    for (auto it = placements_.begin(); it != placements_.end();) {
        const DeviceState* best = nullptr;
        std::string best_id;
        double best_util = 0;
        for (const auto& [id, d] : devices_) {
            if (it->device && *it->device != id) continue;
            if (d.stale || d.window.empty()) continue;
            const double u = d.window.back().utilization - d.window.back().self_load;
            if (u >= config_.idle_threshold) continue;
            if (!best || u < best_util) {
                best = &d;
                best_id = id;
                best_util = u;
            }
        }
        if (!best) {
            ++it;
            continue;
        }
        actions.push_back({ActionKind::PlaceInstance, it->id, best_id, std::nullopt});
        it = placements_.erase(it);
    }
    return actions;
}

std::optional<TicketState> Scheduler::job_state(const std::string& job_id) const {
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second.state;
}

std::optional<std::string> Scheduler::running_device(const std::string& job_id) const {
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second.device;
}

std::vector<PlacementRequest> Scheduler::pending_placements() const { return placements_; }

std::vector<std::string> Scheduler::devices() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : devices_) out.push_back(id);
    return out;
}

json Scheduler::status() const {
    json devices = json::object();
    for (const auto& [id, d] : devices_) {
        devices[id] = {{"samples", samples(id)},
                       {"stale", d.stale},
                       {"idle", idle(d)},
                       {"running_job", d.running_job ? json(*d.running_job) : json(nullptr)},
                       {"self_load", d.self_load}};
    }
    json jobs = json::array();
    for (const auto& [id, job] : jobs_) {
        json cells = json::array();
        for (const auto& c : job.ticket.remaining) cells.push_back(c.str());
        jobs.push_back({{"job_id", id},
                        {"sequence", job.ticket.sequence},
                        {"state", to_string(job.state)},
                        {"device", job.device ? json(*job.device) : json(nullptr)},
                        {"remaining_cells", cells}});
    }
    json placements = json::array();
    for (const auto& p : placements_) {
        placements.push_back({{"placement_id", p.id},
                              {"variant_id", p.variant_id},
                              {"backend", p.backend},
                              {"protocol", p.protocol},
                              {"device", p.device ? json(*p.device) : json(nullptr)},
                              {"state", "pending"}});
    }
    return {{"idle_threshold", config_.idle_threshold},
            {"consecutive_samples", config_.consecutive_samples},
            {"devices", devices},
            {"jobs", jobs},
            {"placements", placements}};
}

}  // namespace modelci::controller
