// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/dispatcher/dispatcher.hpp"

#include <condition_variable>
#include <thread>

#include <json.hpp>

#include "modelci/client.hpp"
#include "modelci/error.hpp"
#include "modelci/util/fs.hpp"
#include "modelci/util/id.hpp"

namespace modelci::dispatcher {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(InstanceState s) noexcept {
    switch (s) {
        case InstanceState::Starting: return "starting";
        case InstanceState::Ready: return "ready";
        case InstanceState::Unhealthy: return "unhealthy";
        case InstanceState::Stopped: return "stopped";
    }
    return "unknown";
}

void to_json(json& j, const ServiceInstance& i) {
    j = json{{"id", i.id},
             {"variant_id", i.variant_id},
             {"record_id", i.record_id},
             {"device", i.device},
             {"backend", i.backend},
             {"protocol", to_string(i.protocol)},
             {"endpoint", i.endpoint.str()},
             {"state", to_string(i.state)},
             {"created_at", util::format_timestamp(i.created_at)}};
}

struct Dispatcher::Entry {
    std::mutex op_mu;  // serializes health() and terminate()
    mutable std::mutex state_mu;
    ServiceInstance info;
    int failures = 0;
    std::condition_variable_any wake;
    std::jthread poller;

    ServiceInstance snapshot() const {
        std::lock_guard lock(state_mu);
        return info;
    }
};

Dispatcher::Dispatcher(std::shared_ptr<registry::Registry> registry, std::shared_ptr<telemetry::Telemetry> telemetry,
                       DispatcherOptions options)
    : registry_(std::move(registry)),
      telemetry_(std::move(telemetry)),
      options_(std::move(options)),
      local_(std::make_shared<LocalProcessBackend>()) {
#ifdef MODELCI_WITH_CONTAINER
    container_ = std::make_shared<ContainerBackend>(options_.container_runtime);
#endif
    std::filesystem::create_directories(options_.runtime_dir / "instances");
}

Dispatcher::~Dispatcher() { shutdown(); }

void Dispatcher::add_backend(ServingBackendTemplate backend) {
    backend.validate();
    std::lock_guard lock(mu_);
    backends_[backend.name] = std::move(backend);
}

std::vector<ServingBackendTemplate> Dispatcher::backends() const {
    std::lock_guard lock(mu_);
    std::vector<ServingBackendTemplate> out;
    for (const auto& [name, b] : backends_) out.push_back(b);
    return out;
}

const ServingBackendTemplate& Dispatcher::backend(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = backends_.find(name);
    if (it == backends_.end()) {
        throw Error(ErrorCode::NotFound, "unknown serving backend '" + name + "'", {{"backend", name}});
    }
    return it->second;
}

void Dispatcher::set_execution_backend(LaunchTemplate::Kind kind, std::shared_ptr<ExecutionBackend> backend) {
    std::lock_guard lock(mu_);
    (kind == LaunchTemplate::Kind::Process ? local_ : container_) = std::move(backend);
}

ExecutionBackend& Dispatcher::execution_for(LaunchTemplate::Kind kind) {
    std::lock_guard lock(mu_);
    auto& backend = kind == LaunchTemplate::Kind::Process ? local_ : container_;
    if (!backend) throw Error(ErrorCode::LaunchFailure, "container support is not enabled in this build");
    return *backend;
}

void Dispatcher::set_event_listener(EventListener listener) {
    std::lock_guard lock(mu_);
    listener_ = std::move(listener);
}

void Dispatcher::emit(const std::string& type, const json& payload) const {
    EventListener listener;
    {
        std::lock_guard lock(mu_);
        listener = listener_;
    }
    if (listener) listener(type, payload);
}

namespace {

std::string model_file_name(const std::string& format) {
    if (format == "toy-binary") return "model.bin";
    if (format == "toy-json") return "model.json";
    return "model";
}

bool probe_once(const Endpoint& endpoint, Protocol protocol, std::chrono::milliseconds timeout) {
    ServiceClient client(endpoint, protocol, timeout, timeout);
    auto res = client.health();
    return res && res->status == 200;
}

}  // namespace

ServiceInstance Dispatcher::dispatch(const std::string& variant_id, const std::string& device,
                                     const std::string& backend_name, Protocol protocol) {
    auto found = registry_->find_variant(variant_id);
    if (!found) throw Error(ErrorCode::NotFound, "variant " + variant_id + " not found", {{"variant_id", variant_id}});
    const auto& [record, variant] = *found;
    const ServingBackendTemplate tmpl = backend(backend_name);
    if (!tmpl.accepts(variant.format)) {
        throw Error(ErrorCode::IncompatibleFormat,
                    "backend " + tmpl.name + " does not accept format " + variant.format,
                    {{"format", variant.format}, {"backend", tmpl.name}});
    }
    if (!tmpl.supports(protocol)) {
        throw Error(ErrorCode::IncompatibleFormat,
                    "backend " + tmpl.name + " does not serve protocol " + std::string(to_string(protocol)),
                    {{"protocol", std::string(to_string(protocol))}, {"backend", tmpl.name}});
    }
    if (!telemetry_ || !telemetry_->device_known(device)) {
        throw Error(ErrorCode::UnknownDevice, "device " + device + " is not reported by telemetry",
                    {{"device", device}});
    }

    ServiceInstance inst;
    inst.id = util::new_id();
    inst.variant_id = variant.id;
    inst.record_id = record.id;
    inst.device = device;
    inst.backend = tmpl.name;
    inst.protocol = protocol;
    inst.created_at = util::now();

    const auto deadline = Clock::now() + options_.ready_timeout;
    ExecutionSpec spec;
    spec.instance_id = inst.id;
    spec.work_dir = options_.runtime_dir / "instances" / inst.id;
    spec.model_dir = spec.work_dir / "model";
    spec.image = tmpl.launch.image;
    spec.device = device;
    const std::string file = model_file_name(variant.format);
    std::filesystem::create_directories(spec.model_dir);
    util::write_file_atomic(spec.model_dir / file, registry_->get_blob(variant.blob_digest));
    const bool container = tmpl.launch.kind == LaunchTemplate::Kind::Container;
    spec.argv = expand_command(
        tmpl.launch.command,
        {{"model", container ? std::string(ContainerBackend::kModelMount) + "/" + file : (spec.model_dir / file).string()},
         {"port", "0"},
         {"protocol", std::string(to_string(protocol))},
         {"device", device},
         {"mockserve", options_.mockserve_path}});

    auto cleanup_dir = [&] {
        std::error_code ec;
        std::filesystem::remove_all(spec.model_dir, ec);
    };

    ExecutionBackend& exec = execution_for(tmpl.launch.kind);
    Started started;
    try {
        started = exec.start(spec, options_.ready_timeout);
    } catch (...) {
        cleanup_dir();
        throw;
    }
    inst.handle = started.handle;
    inst.pid = started.pid;
    inst.endpoint = Endpoint{"127.0.0.1", started.port};

    // The handshake says the socket is bound; readiness is the health probe.
    while (!probe_once(inst.endpoint, protocol, options_.probe_timeout)) {
        if (!exec.alive(inst.handle)) {
            exec.stop(inst.handle);
            cleanup_dir();
            throw Error(ErrorCode::LaunchFailure, "backend exited before becoming healthy",
                        {{"instance_id", inst.id}});
        }
        if (Clock::now() >= deadline) {
            exec.stop(inst.handle);
            cleanup_dir();
            throw Error(ErrorCode::ReadyTimeout,
                        "instance not healthy within " + std::to_string(options_.ready_timeout.count()) + " ms",
                        {{"instance_id", inst.id}});
        }
        std::this_thread::sleep_for(options_.ready_poll_interval);
    }
    inst.state = InstanceState::Ready;

    auto entry = std::make_shared<Entry>();
    entry->info = inst;
    {
        std::lock_guard lock(mu_);
        instances_[inst.id] = entry;
    }
    if (telemetry_ && inst.pid > 0) telemetry_->track_instance(inst.id, inst.pid);
    emit("instance_state", inst);

    const auto interval = options_.health_interval;
    entry->poller = std::jthread([this, entry, interval](std::stop_token st) {
        std::mutex m;
        while (!st.stop_requested()) {
            {
                std::unique_lock lock(m);
                entry->wake.wait_for(lock, st, interval, [] { return false; });
            }
            if (st.stop_requested()) break;
            probe(*entry);
        }
    });
    return inst;
}

InstanceState Dispatcher::probe(Entry& entry) {
    ServiceInstance before = entry.snapshot();
    if (before.state == InstanceState::Stopped) return InstanceState::Stopped;
    const bool ok = probe_once(before.endpoint, before.protocol, options_.probe_timeout);

    ServiceInstance after;
    bool changed = false;
    {
        std::lock_guard lock(entry.state_mu);
        if (entry.info.state == InstanceState::Stopped) return InstanceState::Stopped;
        if (ok) {
            entry.failures = 0;
            changed = entry.info.state != InstanceState::Ready;
            entry.info.state = InstanceState::Ready;
        } else if (++entry.failures >= options_.unhealthy_after && entry.info.state == InstanceState::Ready) {
            entry.info.state = InstanceState::Unhealthy;
            changed = true;
        }
        after = entry.info;
    }
    if (changed) emit("instance_state", after);
    return after.state;
}

std::shared_ptr<Dispatcher::Entry> Dispatcher::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = instances_.find(id);
    if (it == instances_.end()) throw Error(ErrorCode::NotFound, "instance " + id + " not found", {{"instance_id", id}});
    return it->second;
}

InstanceState Dispatcher::health(const std::string& instance_id) {
    auto entry = find(instance_id);
    std::lock_guard op(entry->op_mu);
    return probe(*entry);
}

void Dispatcher::terminate(const std::string& instance_id) {
    auto entry = find(instance_id);
    std::lock_guard op(entry->op_mu);
    if (entry->snapshot().state == InstanceState::Stopped) {
        throw Error(ErrorCode::NotFound, "instance " + instance_id + " already stopped", {{"instance_id", instance_id}});
    }
    entry->poller.request_stop();
    entry->wake.notify_all();
    if (entry->poller.joinable()) entry->poller.join();

    const auto kind = backend(entry->snapshot().backend).launch.kind;
    execution_for(kind).stop(entry->snapshot().handle);
    ServiceInstance stopped;
    {
        std::lock_guard lock(entry->state_mu);
        entry->info.state = InstanceState::Stopped;
        stopped = entry->info;
    }
    if (telemetry_) telemetry_->untrack_instance(instance_id);
    std::error_code ec;
    std::filesystem::remove_all(options_.runtime_dir / "instances" / instance_id / "model", ec);
    emit("instance_state", stopped);
}

ServiceInstance Dispatcher::get(const std::string& instance_id) const { return find(instance_id)->snapshot(); }

std::vector<ServiceInstance> Dispatcher::list() const {
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, e] : instances_) entries.push_back(e);
    }
    std::vector<ServiceInstance> out;
    for (const auto& e : entries) out.push_back(e->snapshot());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
    });
    return out;
}

bool Dispatcher::record_in_use(const std::string& record_id) const {
    for (const auto& inst : list()) {
        if (inst.record_id == record_id && inst.state != InstanceState::Stopped) return true;
    }
    return false;
}

void Dispatcher::shutdown() {
    for (const auto& inst : list()) {
        if (inst.state == InstanceState::Stopped) continue;
        try {
            terminate(inst.id);
        } catch (const Error&) {
            // Raced with another terminate.
        }
    }
}

}  // namespace modelci::dispatcher
