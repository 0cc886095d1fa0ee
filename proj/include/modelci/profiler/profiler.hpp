// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "modelci/dispatcher/dispatcher.hpp"
#include "modelci/profiler/job.hpp"
#include "modelci/profiler/measure.hpp"
#include "modelci/registry/registry.hpp"
#include "modelci/telemetry/telemetry.hpp"

namespace modelci::profiler {

struct ProfilerOptions {
    std::chrono::milliseconds connect_timeout{1000};
    std::chrono::milliseconds request_timeout{30000};
    double max_failure_fraction = 0.05;
    // Recorded in results: what memory_bytes/utilization measured.
    std::string resource_source = "process-rss/cpu";
};

struct CellReport {
    std::string job_id;
    CellKey cell;
    std::optional<registry::ProfilingResult> result;
    std::string error;  // set when the cell failed
    JobState job_state = JobState::Running;
};

// Runs sweep cells: dispatch (reusing one instance per device, backend and
// protocol), warm up, measure, aggregate. Each result is written to the job
// document first and to the model record second; reconcile() repairs the
// gap after a crash.
class Profiler {
public:
    using EventListener = std::function<void(const std::string& type, const nlohmann::json& payload)>;
    // Called with each resource sample of a running cell's instance.
    using LoadListener = std::function<void(const std::string& device, double cpu_fraction)>;
    // Asked before each cell of run_sweep; false pauses the job.
    using Gate = std::function<bool(const CellKey& cell)>;

    Profiler(std::shared_ptr<registry::Registry> registry, std::shared_ptr<dispatcher::Dispatcher> dispatcher,
             std::shared_ptr<telemetry::Telemetry> telemetry, std::shared_ptr<JobStore> jobs,
             ProfilerOptions options = {});
    ~Profiler();

    // Throws NotFound for an unknown variant, InvalidArgument for a bad sweep.
    ProfilingJob create_job(const std::string& variant_id, SweepSpec sweep);
    ProfilingJob job(const std::string& id) const;  // NotFound
    std::vector<ProfilingJob> jobs() const;
    void set_state(const std::string& job_id, JobState state);

    // Measures one remaining cell of the job and records the outcome.
    // Cell problems are reported in the CellReport rather than thrown.
    CellReport run_cell(const std::string& job_id, const CellKey& cell);

    // Runs the job's remaining cells in sweep order.
    std::vector<registry::ProfilingResult> run_sweep(const std::string& job_id, const Gate& gate = {});

    // Stops instances the job kept for reuse.
    void release_instances(const std::string& job_id);

    // Copies job results missing from their records and returns jobs that
    // were mid-cell (state running) to queued.
    void reconcile();

    void set_event_listener(EventListener listener);
    void set_load_listener(LoadListener listener);

private:
    struct GroupKey {
        std::string device, backend, protocol;
        auto operator<=>(const GroupKey&) const = default;
    };

    std::string ensure_instance(const ProfilingJob& job, const CellKey& cell);
    void save_locked(ProfilingJob& job);
    void emit(const std::string& type, const nlohmann::json& payload) const;
    void finish_cell(const std::string& job_id, const CellKey& cell, std::optional<registry::ProfilingResult> result,
                     const std::string& error, CellReport& report);

    std::shared_ptr<registry::Registry> registry_;
    std::shared_ptr<dispatcher::Dispatcher> dispatcher_;
    std::shared_ptr<telemetry::Telemetry> telemetry_;
    std::shared_ptr<JobStore> store_;
    ProfilerOptions options_;

    mutable std::mutex mu_;
    std::map<std::string, ProfilingJob> jobs_;
    std::int64_t next_sequence_ = 1;
    std::map<std::string, std::map<GroupKey, std::string>> instances_;  // job -> group -> instance
    EventListener events_;
    LoadListener load_;
};

}  // namespace modelci::profiler
