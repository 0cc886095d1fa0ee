// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <condition_variable>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "modelci/controller/controller.hpp"
#include "modelci/converter/converter.hpp"
#include "modelci/dispatcher/dispatcher.hpp"
#include "modelci/gateway/config.hpp"
#include "modelci/gateway/events.hpp"
#include "modelci/profiler/profiler.hpp"
#include "modelci/registry/registry.hpp"
#include "modelci/telemetry/telemetry.hpp"
#include "modelci/util/thread_per_task.hpp"

namespace modelci::gateway {

struct DeployRequest {
    std::optional<std::string> variant_id;
    std::optional<std::string> device;  // empty: let the controller place it
    std::string backend = "mockserve";
    Protocol protocol = Protocol::Rest;
};

struct DeployOutcome {
    std::optional<dispatcher::ServiceInstance> instance;
    std::string placement_id;  // set when placement is still pending
};

// Every module wired together: the daemon behind the REST API.
//
// Registration kicks off conversion in the background; each converted
// variant gets a profiling job that the controller schedules cell by cell
// on idle devices.
class Platform {
public:
    // `provider` overrides the configured telemetry source (tests).
    explicit Platform(DaemonConfig config, std::shared_ptr<telemetry::DeviceProvider> provider = nullptr);
    ~Platform();
    Platform(const Platform&) = delete;
    Platform& operator=(const Platform&) = delete;

    // Recovers persisted jobs and starts telemetry and scheduling.
    void start();
    void shutdown();

    registry::ModelRecord register_model(const std::string& manifest_yaml, std::string_view weights);
    std::vector<registry::ModelRecord> list_models(const registry::ModelQuery& query) const;
    registry::ModelRecord get_model(const std::string& id) const;
    registry::ModelRecord update_model(const std::string& id, const nlohmann::json& patch,
                                       const std::optional<std::string>& expected_updated_at);
    // Queued jobs of the record are cancelled; a running cell or a live
    // instance makes the record InUse.
    registry::DeletionSummary delete_model(const std::string& id);

    // Synchronous. Returns {"record", "variants", "failures"}.
    nlohmann::json convert(const std::string& id, const std::vector<std::string>& targets);
    // Body fields override the configured sweep defaults; "variant_id"
    // restricts the request to one variant.
    std::vector<profiler::ProfilingJob> profile(const std::string& id, const nlohmann::json& body);
    std::vector<registry::ProfilingResult> results(const std::string& id) const;

    DeployOutcome deploy(const std::string& id, const DeployRequest& request);
    std::vector<dispatcher::ServiceInstance> instances() const;
    dispatcher::ServiceInstance stop_instance(const std::string& id);

    nlohmann::json devices();
    profiler::ProfilingJob job(const std::string& id) const;
    std::vector<profiler::ProfilingJob> jobs() const;
    nlohmann::json controller_status();
    nlohmann::json placements() const;
    std::string metrics();

    EventBus& events() noexcept { return events_; }
    const DaemonConfig& config() const noexcept { return config_; }
    std::vector<dispatcher::ServingBackendTemplate> backends() const;

    // Blocks until background conversions for the record have finished.
    void wait_for_conversion(const std::string& record_id, std::chrono::milliseconds timeout);

private:
    void run_conversion(const std::string& record_id, bool then_profile);
    std::vector<profiler::ProfilingJob> submit_jobs(const std::vector<registry::ModelVariant>& variants,
                                                   const nlohmann::json& overrides);
    profiler::SweepSpec sweep_for(const registry::ModelVariant& variant, const nlohmann::json& overrides);
    void feed_loop(std::stop_token stop);

    // Controller hooks; they hand work to workers_ and return.
    void on_start_cell(const std::string& job_id, const profiler::CellKey& cell);
    void on_pause(const std::string& job_id);
    void on_resume(const std::string& job_id);
    void on_job_state(const std::string& job_id, controller::TicketState state);
    void on_place(const controller::PlacementRequest& request, const std::string& device);

    DaemonConfig config_;
    EventBus events_;
    std::shared_ptr<registry::Store> store_;
    std::shared_ptr<registry::Registry> registry_;
    std::shared_ptr<converter::PluginRegistry> plugins_;
    std::unique_ptr<converter::Converter> converter_;
    std::shared_ptr<telemetry::Telemetry> telemetry_;
    std::shared_ptr<dispatcher::Dispatcher> dispatcher_;
    std::shared_ptr<profiler::JobStore> job_store_;
    std::shared_ptr<profiler::Profiler> profiler_;
    std::unique_ptr<controller::Controller> controller_;
    util::ThreadPerTask workers_;
    std::jthread feed_;

    mutable std::mutex mu_;
    std::condition_variable conversions_cv_;
    std::map<std::string, int> conversions_;  // record -> in-flight conversions
    struct ActiveCell {
        profiler::CellKey cell;
        std::string record_id;
    };
    std::map<std::string, ActiveCell> active_cells_;  // job -> running cell
    std::set<std::string> paused_;
    struct Placement {
        controller::PlacementRequest request;
        std::string state = "pending";  // pending | placed | failed
        std::string instance_id;
        std::string error;
        std::shared_ptr<std::promise<dispatcher::ServiceInstance>> done;
    };
    std::map<std::string, Placement> placements_;
    std::int64_t placement_seq_ = 0;
    bool started_ = false;
    bool stopped_ = false;
};

}  // namespace modelci::gateway
