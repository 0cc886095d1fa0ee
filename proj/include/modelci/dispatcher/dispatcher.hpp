// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "modelci/dispatcher/backend.hpp"
#include "modelci/protocol.hpp"
#include "modelci/registry/registry.hpp"
#include "modelci/telemetry/telemetry.hpp"
#include "modelci/util/time.hpp"

namespace modelci::dispatcher {

enum class InstanceState { Starting, Ready, Unhealthy, Stopped };
std::string_view to_string(InstanceState s) noexcept;

struct ServiceInstance {
    std::string id;
    std::string variant_id;
    std::string record_id;
    std::string device;
    std::string backend;
    Protocol protocol = Protocol::Rest;
    Endpoint endpoint;
    InstanceState state = InstanceState::Starting;
    std::string handle;
    int pid = -1;
    util::Timestamp created_at{};
};

void to_json(nlohmann::json& j, const ServiceInstance& i);

struct DispatcherOptions {
    std::filesystem::path runtime_dir;
    std::chrono::milliseconds ready_timeout{30000};
    std::chrono::milliseconds ready_poll_interval{10};
    std::chrono::milliseconds health_interval{1000};
    std::chrono::milliseconds probe_timeout{1000};
    std::string mockserve_path = "modelci-mockserve";
    std::string container_runtime = "docker";
    int unhealthy_after = 2;
};

// Launches variants behind serving backends and tracks the instances.
class Dispatcher {
public:
    using EventListener = std::function<void(const std::string& type, const nlohmann::json& payload)>;

    Dispatcher(std::shared_ptr<registry::Registry> registry, std::shared_ptr<telemetry::Telemetry> telemetry,
               DispatcherOptions options);
    ~Dispatcher();
    Dispatcher(const Dispatcher&) = delete;
    Dispatcher& operator=(const Dispatcher&) = delete;

    void add_backend(ServingBackendTemplate backend);
    std::vector<ServingBackendTemplate> backends() const;
    const ServingBackendTemplate& backend(const std::string& name) const;
    // Test hook: replace the execution backend used for a launch kind.
    void set_execution_backend(LaunchTemplate::Kind kind, std::shared_ptr<ExecutionBackend> backend);

    // Blocks until the instance is ready. Throws NotFound, IncompatibleFormat,
    // UnknownDevice, LaunchFailure or ReadyTimeout.
    ServiceInstance dispatch(const std::string& variant_id, const std::string& device,
                             const std::string& backend_name, Protocol protocol);
    void terminate(const std::string& instance_id);
    // Probes a live instance and returns its state; stopped instances are
    // reported without probing.
    InstanceState health(const std::string& instance_id);

    ServiceInstance get(const std::string& instance_id) const;
    std::vector<ServiceInstance> list() const;
    // True while any non-stopped instance serves a variant of the record.
    bool record_in_use(const std::string& record_id) const;

    void set_event_listener(EventListener listener);
    // Stops every instance.
    void shutdown();

private:
    struct Entry;

    std::shared_ptr<Entry> find(const std::string& id) const;
    InstanceState probe(Entry& entry);
    void emit(const std::string& type, const nlohmann::json& payload) const;
    ExecutionBackend& execution_for(LaunchTemplate::Kind kind);

    std::shared_ptr<registry::Registry> registry_;
    std::shared_ptr<telemetry::Telemetry> telemetry_;
    DispatcherOptions options_;

    mutable std::mutex mu_;
    std::map<std::string, ServingBackendTemplate> backends_;
    std::map<std::string, std::shared_ptr<Entry>> instances_;
    std::shared_ptr<ExecutionBackend> local_;
    std::shared_ptr<ExecutionBackend> container_;
    EventListener listener_;
};

}  // namespace modelci::dispatcher
