// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "modelci/profiler/job.hpp"
#include "modelci/telemetry/types.hpp"

namespace modelci::controller {

struct ControllerConfig {
    double idle_threshold = 0.4;  // tau
    int consecutive_samples = 3;  // K
    static constexpr int max_concurrent_profilings_per_device = 1;

    // Throws Error(InvalidArgument).
    void validate() const;
};

enum class ActionKind { StartCell, PauseJob, ResumeJob, PlaceInstance };
std::string_view to_string(ActionKind kind) noexcept;

struct SchedulingAction {
    ActionKind kind = ActionKind::StartCell;
    std::string ref;  // job id or placement id
    std::string device;
    std::optional<profiler::CellKey> cell;  // start_cell only

    bool operator==(const SchedulingAction&) const = default;
};

void to_json(nlohmann::json& j, const SchedulingAction& a);

// What the scheduler needs to know about a profiling job.
struct JobTicket {
    std::string id;
    std::int64_t sequence = 0;  // FIFO key
    std::vector<profiler::CellKey> remaining;  // sweep order
    bool paused = false;
};

struct PlacementRequest {
    std::string id;
    std::string variant_id;
    std::string backend;
    std::string protocol;
    std::optional<std::string> device;  // constraint
    std::int64_t sequence = 0;
};

enum class TicketState { Queued, WaitingForDevice, Running, Paused };
std::string_view to_string(TicketState s) noexcept;

// The scheduling rule as a pure state machine. No clocks, no threads:
// callers feed snapshots and completions, tick() returns the actions.
class Scheduler {
public:
    explicit Scheduler(ControllerConfig config = {});

    const ControllerConfig& config() const noexcept { return config_; }

    void on_snapshot(const telemetry::DeviceSnapshot& snapshot);
    // CPU share of the profiled instance on a device; subtracted from the
    // device's utilization when deciding whether to preempt.
    void on_instance_load(const std::string& device, double fraction);

    // Throws Conflict when the id is already known.
    void submit(JobTicket job);
    void request_placement(PlacementRequest request);
    // A started cell ended (success or failure). The job leaves the queue
    // once no cells remain.
    void on_cell_finished(const std::string& job_id, const profiler::CellKey& cell);
    // Drops a job (e.g. deleted model) and frees its device.
    void cancel(const std::string& job_id);

    bool is_idle(const std::string& device) const;
    bool is_stale(const std::string& device) const;
    // Last K samples, oldest first.
    std::vector<double> samples(const std::string& device) const;

    std::vector<SchedulingAction> tick();

    std::optional<TicketState> job_state(const std::string& job_id) const;
    std::optional<std::string> running_device(const std::string& job_id) const;
    std::vector<PlacementRequest> pending_placements() const;
    std::vector<std::string> devices() const;
    nlohmann::json status() const;

private:
    struct Sample {
        double utilization;
        double self_load;
    };
    struct DeviceState {
        std::deque<Sample> window;
        bool stale = true;
        double self_load = 0;
        std::optional<std::string> running_job;
    };
    struct Job {
        JobTicket ticket;
        TicketState state = TicketState::Queued;
        bool started = false;
        std::optional<std::string> device;  // where its current cell runs
        std::optional<std::string> last_device;
    };

    bool busy(const DeviceState& d) const;
    bool idle(const DeviceState& d) const;

    ControllerConfig config_;
    std::map<std::string, DeviceState> devices_;
    std::map<std::string, Job> jobs_;
    std::vector<PlacementRequest> placements_;
};

}  // namespace modelci::controller
