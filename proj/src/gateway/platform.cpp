// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/gateway/platform.hpp"

#include <algorithm>

#include "modelci/error.hpp"
#include "modelci/telemetry/provider.hpp"
#include "modelci/util/fs.hpp"
#include "modelci/util/id.hpp"

namespace modelci::gateway {

using json = nlohmann::json;

namespace {

std::shared_ptr<telemetry::DeviceProvider> make_provider(const TelemetryConfig& t) {
    if (t.provider == "synthetic") {
        const auto mode = t.realtime ? telemetry::SyntheticProvider::Mode::Realtime
                                     : telemetry::SyntheticProvider::Mode::Step;
        return std::make_shared<telemetry::SyntheticProvider>(
            telemetry::SyntheticProvider::parse_trace(util::read_file(t.trace)), mode);
    }
    return std::make_shared<telemetry::HostProvider>();
}

json record_event(const registry::ModelRecord& r) {
    return {{"id", r.id},
            {"name", r.name},
            {"version", r.version},
            {"status", registry::to_string(r.status)},
            {"variants", r.variants.size()},
            {"results", r.profiling_results.size()},
            {"updated_at", util::format_timestamp(r.updated_at)}};
}

}  // namespace

Platform::Platform(DaemonConfig config, std::shared_ptr<telemetry::DeviceProvider> provider)
    : config_(std::move(config)) {
    if (config_.runtime_dir.empty()) config_.runtime_dir = config_.store_path / "runtime";
    config_.validate();
    std::filesystem::create_directories(config_.store_path);
    std::filesystem::create_directories(config_.runtime_dir);

    store_ = std::make_shared<registry::FileStore>(config_.store_path);
    registry_ = std::make_shared<registry::Registry>(store_);

    plugins_ = std::make_shared<converter::PluginRegistry>();
    for (auto& p : converter::default_plugins()) plugins_->register_plugin(std::move(p));
    for (auto p : config_.plugins) plugins_->register_plugin(std::move(p));
    converter::ConverterOptions copts;
    copts.work_dir = config_.runtime_dir / "convert";
    converter_ = std::make_unique<converter::Converter>(*registry_, plugins_, copts);

    telemetry::TelemetryOptions topts;
    topts.interval = config_.telemetry.interval;
    telemetry_ = std::make_shared<telemetry::Telemetry>(provider ? provider : make_provider(config_.telemetry), topts);

    dispatcher::DispatcherOptions dopts;
    dopts.runtime_dir = config_.runtime_dir;
    dopts.ready_timeout = config_.ready_timeout;
    dopts.health_interval = config_.health_interval;
    dopts.mockserve_path = config_.mockserve_path;
    dopts.container_runtime = config_.container_runtime;
    dispatcher_ = std::make_shared<dispatcher::Dispatcher>(registry_, telemetry_, dopts);
    dispatcher_->add_backend(dispatcher::mockserve_template(config_.mockserve_args));
    for (auto b : config_.backends) dispatcher_->add_backend(std::move(b));

    job_store_ = std::make_shared<profiler::JobStore>(store_);
    profiler_ = std::make_shared<profiler::Profiler>(registry_, dispatcher_, telemetry_, job_store_);

    controller::ControllerHooks hooks;
    hooks.start_cell = [this](const std::string& job, const profiler::CellKey& cell) { on_start_cell(job, cell); };
    hooks.pause_job = [this](const std::string& job) { on_pause(job); };
    hooks.resume_job = [this](const std::string& job) { on_resume(job); };
    hooks.job_state = [this](const std::string& job, controller::TicketState s) { on_job_state(job, s); };
    hooks.place_instance = [this](const controller::PlacementRequest& r, const std::string& d) { on_place(r, d); };
    controller_ = std::make_unique<controller::Controller>(config_.controller, std::move(hooks));

    registry_->set_change_listener([this](const registry::ModelRecord& r) { events_.publish("model", record_event(r)); });
    registry_->set_in_use_check([this](const std::string& record_id) {
        if (dispatcher_->record_in_use(record_id)) return true;
        std::lock_guard lock(mu_);
        return std::any_of(active_cells_.begin(), active_cells_.end(),
                           [&](const auto& kv) { return kv.second.record_id == record_id; });
    });
    dispatcher_->set_event_listener([this](const std::string& type, const json& payload) { events_.publish(type, payload); });
    profiler_->set_event_listener([this](const std::string& type, const json& payload) { events_.publish(type, payload); });
    profiler_->set_load_listener(
        [this](const std::string& device, double fraction) { controller_->post_instance_load(device, fraction); });
}

Platform::~Platform() { shutdown(); }

void Platform::start() {
    {
        std::lock_guard lock(mu_);
        if (started_) return;
        started_ = true;
    }
    profiler_->reconcile();
    // Nothing converts in a fresh process; a record left converting was cut
    // off by a crash. Failed lets the client convert it again.
    registry::ModelQuery converting;
    converting.status = registry::ModelStatus::Converting;
    for (const auto& r : registry_->retrieve(converting)) {
        registry_->transition(r.id, registry::ModelStatus::Failed);
    }
    for (const auto& job : profiler_->jobs()) {
        if (job.finished()) continue;
        auto remaining = job.remaining_cells();
        if (remaining.empty()) continue;
        controller_->submit({job.id, job.sequence, std::move(remaining), job.state == profiler::JobState::Paused});
        if (job.state == profiler::JobState::Paused) {
            std::lock_guard lock(mu_);
            paused_.insert(job.id);
        }
    }
    telemetry_->start();
    feed_ = std::jthread([this](std::stop_token st) { feed_loop(st); });
}

void Platform::shutdown() {
    {
        std::lock_guard lock(mu_);
        if (stopped_) return;
        stopped_ = true;
    }
    if (feed_.joinable()) {
        feed_.request_stop();
        feed_.join();
    }
    controller_->stop();
    workers_.shutdown();
    dispatcher_->shutdown();
    telemetry_->stop();
    events_.close_all();
}

void Platform::feed_loop(std::stop_token stop) {
    auto sub = telemetry_->subscribe(config_.telemetry.interval);
    while (!stop.stop_requested()) {
        auto snapshot = sub->next(std::chrono::milliseconds(100));
        if (!snapshot) continue;
        controller_->post_snapshot(*snapshot);
        events_.publish("snapshot", *snapshot);
    }
    sub->close();
}

registry::ModelRecord Platform::register_model(const std::string& manifest_yaml, std::string_view weights) {
    const auto manifest = registry::parse_manifest(manifest_yaml);
    auto record = registry_->register_model(manifest, weights);
    if (manifest.convert) {
        {
            std::lock_guard lock(mu_);
            ++conversions_[record.id];
        }
        const bool then_profile = manifest.profile;
        const auto id = record.id;
        if (!workers_.enqueue([this, id, then_profile] { run_conversion(id, then_profile); })) {
            std::lock_guard lock(mu_);
            conversions_.erase(id);
        }
    }
    return record;
}

void Platform::run_conversion(const std::string& record_id, bool then_profile) {
    try {
        const auto record = registry_->get(record_id);
        const auto plan = converter_->plan(record, {});
        const auto outcome = converter_->run_plan(plan);
        for (const auto& f : outcome.failures) {
            events_.publish("conversion_failed", {{"id", record_id},
                                                  {"target_format", f.target_format},
                                                  {"code", code_name(f.code)},
                                                  {"message", f.message}});
        }
        if (then_profile && !outcome.variants.empty()) {
            submit_jobs(outcome.variants, json::object());
        }
    } catch (const Error& e) {
        events_.publish("conversion_failed", {{"id", record_id}, {"code", code_name(e.code())}, {"message", e.what()}});
    } catch (const std::exception& e) {
        events_.publish("conversion_failed", {{"id", record_id}, {"code", "INTERNAL"}, {"message", e.what()}});
    }
    {
        std::lock_guard lock(mu_);
        if (--conversions_[record_id] <= 0) conversions_.erase(record_id);
    }
    conversions_cv_.notify_all();
}

void Platform::wait_for_conversion(const std::string& record_id, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    conversions_cv_.wait_for(lock, timeout, [&] { return !conversions_.contains(record_id); });
}

std::vector<registry::ModelRecord> Platform::list_models(const registry::ModelQuery& query) const {
    return registry_->retrieve(query);
}

registry::ModelRecord Platform::get_model(const std::string& id) const { return registry_->get(id); }

registry::ModelRecord Platform::update_model(const std::string& id, const json& patch,
                                             const std::optional<std::string>& expected_updated_at) {
    return registry_->update(id, registry::parse_patch(patch), expected_updated_at);
}

registry::DeletionSummary Platform::delete_model(const std::string& id) {
    auto summary = registry_->remove(id);
    for (const auto& job : profiler_->jobs()) {
        if (job.record_id != id || job.finished()) continue;
        controller_->cancel(job.id);
        profiler_->set_state(job.id, profiler::JobState::Failed);
    }
    return summary;
}

json Platform::convert(const std::string& id, const std::vector<std::string>& targets) {
    const auto record = registry_->get(id);
    const auto plan = converter_->plan(record, targets);
    {
        std::lock_guard lock(mu_);
        ++conversions_[id];
    }
    converter::ConversionOutcome outcome;
    try {
        outcome = converter_->run_plan(plan);
    } catch (...) {
        {
            std::lock_guard lock(mu_);
            if (--conversions_[id] <= 0) conversions_.erase(id);
        }
        conversions_cv_.notify_all();
        throw;
    }
    {
        std::lock_guard lock(mu_);
        if (--conversions_[id] <= 0) conversions_.erase(id);
    }
    conversions_cv_.notify_all();
    json failures = json::array();
    for (const auto& f : outcome.failures) {
        failures.push_back({{"target_format", f.target_format}, {"code", code_name(f.code)}, {"message", f.message}});
    }
    return {{"record", registry_->get(id)}, {"variants", outcome.variants}, {"failures", failures}};
}

profiler::SweepSpec Platform::sweep_for(const registry::ModelVariant& variant, const json& overrides) {
    json merged = config_.profiling;
    for (const auto& key : {"batch_sizes", "devices", "backends", "protocols", "requests_per_cell", "warmup_requests",
                            "concurrency", "sample_interval_ms"}) {
        if (overrides.contains(key) && !overrides.at(key).is_null()) merged[key] = overrides.at(key);
    }
    profiler::SweepSpec sweep;
    try {
        sweep = merged.get<profiler::SweepSpec>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad sweep field: ") + e.what());
    }
    if (sweep.devices.empty()) {
        for (const auto& [id, _] : telemetry_->latest().devices) sweep.devices.push_back(id);
    }
    for (const auto& d : sweep.devices) {
        if (!telemetry_->device_known(d)) throw Error(ErrorCode::UnknownDevice, "unknown device " + d, {{"device", d}});
    }
    if (sweep.backends.empty()) {
        for (const auto& b : dispatcher_->backends()) {
            if (b.accepts(variant.format)) sweep.backends.push_back(b.name);
        }
    }
    for (const auto& name : sweep.backends) {
        const auto& b = dispatcher_->backend(name);
        if (!b.accepts(variant.format)) {
            throw Error(ErrorCode::IncompatibleFormat, "backend " + name + " does not accept " + variant.format,
                        {{"backend", name}, {"format", variant.format}, {"variant_id", variant.id}});
        }
        for (const auto& p : sweep.protocols) {
            if (!b.supports(parse_protocol(p))) {
                throw Error(ErrorCode::IncompatibleFormat, "backend " + name + " does not speak " + p,
                            {{"backend", name}, {"protocol", p}});
            }
        }
    }
    if (sweep.backends.empty()) {
        throw Error(ErrorCode::IncompatibleFormat, "no backend accepts format " + variant.format,
                    {{"format", variant.format}, {"variant_id", variant.id}});
    }
    sweep.validate();
    return sweep;
}

std::vector<profiler::ProfilingJob> Platform::submit_jobs(const std::vector<registry::ModelVariant>& variants,
                                                          const json& overrides) {
    // Build every sweep first so a bad request creates no jobs at all.
    std::vector<std::pair<std::string, profiler::SweepSpec>> plans;
    for (const auto& v : variants) plans.emplace_back(v.id, sweep_for(v, overrides));
    std::vector<profiler::ProfilingJob> jobs;
    for (auto& [variant_id, sweep] : plans) {
        auto job = profiler_->create_job(variant_id, std::move(sweep));
        controller_->submit({job.id, job.sequence, job.remaining_cells(), false});
        jobs.push_back(profiler_->job(job.id));
    }
    return jobs;
}

std::vector<profiler::ProfilingJob> Platform::profile(const std::string& id, const json& body) {
    const auto record = registry_->get(id);
    const json overrides = body.is_object() ? body : json::object();
    std::vector<registry::ModelVariant> variants;
    if (overrides.contains("variant_id")) {
        const auto wanted = overrides.at("variant_id").get<std::string>();
        for (const auto& v : record.variants) {
            if (v.id == wanted) variants.push_back(v);
        }
        if (variants.empty()) throw Error(ErrorCode::NotFound, "variant " + wanted + " not in model " + id, {{"id", wanted}});
    } else {
        variants = record.variants;
    }
    if (variants.empty()) {
        throw Error(ErrorCode::IllegalTransition, "model " + id + " has no converted variants to profile",
                    {{"id", id}, {"status", std::string(registry::to_string(record.status))}});
    }
    return submit_jobs(variants, overrides);
}

std::vector<registry::ProfilingResult> Platform::results(const std::string& id) const {
    return registry_->get(id).profiling_results;
}

DeployOutcome Platform::deploy(const std::string& id, const DeployRequest& request) {
    registry_->get(id);  // NotFound first
    wait_for_conversion(id, config_.ready_timeout);
    const auto record = registry_->get(id);
    const auto& backend = dispatcher_->backend(request.backend);

    const registry::ModelVariant* variant = nullptr;
    if (request.variant_id) {
        for (const auto& v : record.variants) {
            if (v.id == *request.variant_id) variant = &v;
        }
        if (!variant) {
            throw Error(ErrorCode::NotFound, "variant " + *request.variant_id + " not in model " + id,
                        {{"id", *request.variant_id}});
        }
    } else {
        for (const auto& v : record.variants) {
            if (backend.accepts(v.format)) {
                variant = &v;
                break;
            }
        }
        if (!variant) {
            throw Error(ErrorCode::IncompatibleFormat, "no variant of model " + id + " is accepted by " + request.backend,
                        {{"id", id}, {"backend", request.backend}});
        }
    }

    if (request.device && !request.device->empty() && *request.device != "auto") {
        auto instance = dispatcher_->dispatch(variant->id, *request.device, request.backend, request.protocol);
        registry_->try_transition(id, registry::ModelStatus::Serving);
        return {instance, ""};
    }

    // Placement by the controller: wait a few telemetry intervals for a
    // device, then report the request as pending.
    auto done = std::make_shared<std::promise<dispatcher::ServiceInstance>>();
    auto result = done->get_future();
    controller::PlacementRequest pr;
    pr.id = "pl-" + util::new_id().substr(0, 12);
    pr.variant_id = variant->id;
    pr.backend = request.backend;
    pr.protocol = std::string(to_string(request.protocol));
    {
        std::lock_guard lock(mu_);
        pr.sequence = ++placement_seq_;
        placements_[pr.id] = {pr, "pending", "", "", done};
    }
    controller_->request_placement(pr);
    const auto wait = config_.telemetry.interval * (config_.controller.consecutive_samples + 3) + config_.ready_timeout;
    if (result.wait_for(wait) != std::future_status::ready) return {std::nullopt, pr.id};
    return {result.get(), ""};
}

void Platform::on_place(const controller::PlacementRequest& request, const std::string& device) {
    workers_.enqueue([this, request, device] {
        std::shared_ptr<std::promise<dispatcher::ServiceInstance>> done;
        {
            std::lock_guard lock(mu_);
            if (auto it = placements_.find(request.id); it != placements_.end()) done = it->second.done;
        }
        try {
            auto instance = dispatcher_->dispatch(request.variant_id, device, request.backend,
                                                  parse_protocol(request.protocol));
            if (auto found = registry_->find_variant(request.variant_id)) {
                registry_->try_transition(found->first.id, registry::ModelStatus::Serving);
            }
            {
                std::lock_guard lock(mu_);
                auto& p = placements_[request.id];
                p.state = "placed";
                p.instance_id = instance.id;
            }
            events_.publish("placement", {{"placement_id", request.id}, {"state", "placed"}, {"instance_id", instance.id}});
            if (done) done->set_value(instance);
        } catch (const std::exception& e) {
            {
                std::lock_guard lock(mu_);
                auto& p = placements_[request.id];
                p.state = "failed";
                p.error = e.what();
            }
            events_.publish("placement", {{"placement_id", request.id}, {"state", "failed"}, {"message", e.what()}});
            if (done) done->set_exception(std::current_exception());
        }
    });
}

json Platform::placements() const {
    std::lock_guard lock(mu_);
    json out = json::array();
    for (const auto& [id, p] : placements_) {
        out.push_back({{"placement_id", id},
                       {"variant_id", p.request.variant_id},
                       {"backend", p.request.backend},
                       {"protocol", p.request.protocol},
                       {"state", p.state},
                       {"instance_id", p.instance_id.empty() ? json(nullptr) : json(p.instance_id)},
                       {"error", p.error.empty() ? json(nullptr) : json(p.error)}});
    }
    return out;
}

void Platform::on_start_cell(const std::string& job_id, const profiler::CellKey& cell) {
    std::string record_id;
    try {
        record_id = profiler_->job(job_id).record_id;
    } catch (const Error&) {
        controller_->cell_finished(job_id, cell);
        return;
    }
    {
        std::lock_guard lock(mu_);
        active_cells_[job_id] = {cell, record_id};
    }
    const bool queued = workers_.enqueue([this, job_id, cell] {
        try {
            profiler_->run_cell(job_id, cell);
        } catch (const std::exception& e) {
            events_.publish("cell_error", {{"job_id", job_id}, {"cell", cell.str()}, {"message", e.what()}});
        }
        bool paused;
        {
            std::lock_guard lock(mu_);
            active_cells_.erase(job_id);
            paused = paused_.contains(job_id);
        }
        if (paused) {
            profiler_->set_state(job_id, profiler::JobState::Paused);
            profiler_->release_instances(job_id);
        }
        controller_->cell_finished(job_id, cell);
    });
    if (!queued) {
        std::lock_guard lock(mu_);
        active_cells_.erase(job_id);
    }
}

void Platform::on_pause(const std::string& job_id) {
    bool running;
    {
        std::lock_guard lock(mu_);
        paused_.insert(job_id);
        running = active_cells_.contains(job_id);
    }
    profiler_->set_state(job_id, profiler::JobState::Paused);
    // A running cell finishes first and releases the instances itself.
    if (!running) workers_.enqueue([this, job_id] { profiler_->release_instances(job_id); });
}

void Platform::on_resume(const std::string& job_id) {
    std::lock_guard lock(mu_);
    paused_.erase(job_id);
}

void Platform::on_job_state(const std::string& job_id, controller::TicketState state) {
    if (state != controller::TicketState::WaitingForDevice) return;
    try {
        if (profiler_->job(job_id).state == profiler::JobState::Queued) {
            profiler_->set_state(job_id, profiler::JobState::WaitingForDevice);
        }
    } catch (const Error&) {
    }
}

std::vector<dispatcher::ServiceInstance> Platform::instances() const { return dispatcher_->list(); }

dispatcher::ServiceInstance Platform::stop_instance(const std::string& id) {
    dispatcher_->terminate(id);
    return dispatcher_->get(id);
}

json Platform::devices() {
    const auto snapshot = telemetry_->latest();
    const auto status = controller_->status();
    json devices = json::array();
    for (const auto& [id, stats] : snapshot.devices) {
        json d = {{"id", id},
                  {"utilization", stats.utilization},
                  {"memory_used", stats.memory_used},
                  {"memory_total", stats.memory_total},
                  {"idle", false},
                  {"samples", json::array()},
                  {"running_job", nullptr}};
        if (status["devices"].contains(id)) {
            const auto& c = status["devices"][id];
            d["idle"] = c["idle"];
            d["samples"] = c["samples"];
            d["running_job"] = c["running_job"];
        }
        devices.push_back(d);
    }
    return {{"timestamp", util::format_timestamp(snapshot.timestamp)},
            {"stale", snapshot.stale},
            {"sequence", snapshot.sequence},
            {"idle_threshold", config_.controller.idle_threshold},
            {"consecutive_samples", config_.controller.consecutive_samples},
            {"devices", devices}};
}

profiler::ProfilingJob Platform::job(const std::string& id) const { return profiler_->job(id); }

std::vector<profiler::ProfilingJob> Platform::jobs() const { return profiler_->jobs(); }

json Platform::controller_status() { return controller_->status(); }

std::string Platform::metrics() { return telemetry_->exposition(); }

std::vector<dispatcher::ServingBackendTemplate> Platform::backends() const { return dispatcher_->backends(); }

}  // namespace modelci::gateway
