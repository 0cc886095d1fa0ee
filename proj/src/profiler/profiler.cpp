// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/profiler/profiler.hpp"

#include <thread>

#include "modelci/error.hpp"
#include "modelci/util/id.hpp"

namespace modelci::profiler {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

Profiler::Profiler(std::shared_ptr<registry::Registry> registry, std::shared_ptr<dispatcher::Dispatcher> dispatcher,
                   std::shared_ptr<telemetry::Telemetry> telemetry, std::shared_ptr<JobStore> jobs,
                   ProfilerOptions options)
    : registry_(std::move(registry)),
      dispatcher_(std::move(dispatcher)),
      telemetry_(std::move(telemetry)),
      store_(std::move(jobs)),
      options_(std::move(options)) {
    for (auto& job : store_->list()) {
        next_sequence_ = std::max(next_sequence_, job.sequence + 1);
        jobs_[job.id] = std::move(job);
    }
}

Profiler::~Profiler() {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, _] : instances_) ids.push_back(id);
    }
    for (const auto& id : ids) release_instances(id);
}

void Profiler::set_event_listener(EventListener listener) {
    std::lock_guard lock(mu_);
    events_ = std::move(listener);
}

void Profiler::set_load_listener(LoadListener listener) {
    std::lock_guard lock(mu_);
    load_ = std::move(listener);
}

void Profiler::emit(const std::string& type, const json& payload) const {
    EventListener listener;
    {
        std::lock_guard lock(mu_);
        listener = events_;
    }
    if (listener) listener(type, payload);
}

void Profiler::save_locked(ProfilingJob& job) {
    job.updated_at = std::max(util::now(), job.updated_at);
    store_->save(job);
}

namespace {

json job_event(const ProfilingJob& job) {
    return json{{"job_id", job.id},
                {"variant_id", job.variant_id},
                {"record_id", job.record_id},
                {"state", to_string(job.state)},
                {"completed_cells", job.completed_cells.size()},
                {"failed_cells", job.failed_cells.size()},
                {"total_cells", enumerate_cells(job.sweep).size()}};
}

}  // namespace

ProfilingJob Profiler::create_job(const std::string& variant_id, SweepSpec sweep) {
    auto found = registry_->find_variant(variant_id);
    if (!found) throw Error(ErrorCode::NotFound, "variant " + variant_id + " not found", {{"variant_id", variant_id}});
    sweep.validate();
    ProfilingJob job;
    job.id = util::new_id();
    job.variant_id = variant_id;
    job.record_id = found->first.id;
    job.sweep = std::move(sweep);
    job.created_at = util::now();
    {
        std::lock_guard lock(mu_);
        job.sequence = next_sequence_++;
        save_locked(job);
        jobs_[job.id] = job;
    }
    emit("job_state", job_event(job));
    return job;
}

ProfilingJob Profiler::job(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "job " + id + " not found", {{"job_id", id}});
    return it->second;
}

std::vector<ProfilingJob> Profiler::jobs() const {
    std::lock_guard lock(mu_);
    std::vector<ProfilingJob> out;
    for (const auto& [_, j] : jobs_) out.push_back(j);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sequence < b.sequence; });
    return out;
}

void Profiler::set_state(const std::string& job_id, JobState state) {
    ProfilingJob copy;
    {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "job " + job_id + " not found");
        if (it->second.state == state || it->second.finished()) return;
        it->second.state = state;
        save_locked(it->second);
        copy = it->second;
    }
    emit("job_state", job_event(copy));
}

std::string Profiler::ensure_instance(const ProfilingJob& job, const CellKey& cell) {
    const GroupKey group{cell.device, cell.backend, cell.protocol};
    std::optional<std::string> stale;
    {
        std::lock_guard lock(mu_);
        auto& groups = instances_[job.id];
        auto it = groups.find(group);
        if (it != groups.end()) {
            try {
                if (dispatcher_->get(it->second).state == dispatcher::InstanceState::Ready) return it->second;
            } catch (const Error&) {
            }
            stale = it->second;
            groups.erase(it);
        }
    }
    if (stale) {
        try {
            dispatcher_->terminate(*stale);
        } catch (const Error&) {
        }
    }
    const auto inst = dispatcher_->dispatch(job.variant_id, cell.device, cell.backend, parse_protocol(cell.protocol));
    std::lock_guard lock(mu_);
    instances_[job.id][group] = inst.id;
    return inst.id;
}

void Profiler::release_instances(const std::string& job_id) {
    std::map<GroupKey, std::string> groups;
    {
        std::lock_guard lock(mu_);
        auto it = instances_.find(job_id);
        if (it == instances_.end()) return;
        groups = std::move(it->second);
        instances_.erase(it);
    }
    for (const auto& [_, id] : groups) {
        try {
            dispatcher_->terminate(id);
        } catch (const Error&) {
        }
    }
}

CellReport Profiler::run_cell(const std::string& job_id, const CellKey& cell) {
    ProfilingJob job;
    {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "job " + job_id + " not found");
        if (it->second.finished()) {
            throw Error(ErrorCode::InvalidArgument, "job " + job_id + " is already " +
                                                        std::string(to_string(it->second.state)));
        }
        const auto all = enumerate_cells(it->second.sweep);
        if (std::find(all.begin(), all.end(), cell) == all.end() || it->second.cell_done(cell)) {
            throw Error(ErrorCode::InvalidArgument, "cell " + cell.str() + " is not pending in job " + job_id);
        }
        it->second.state = JobState::Running;
        save_locked(it->second);
        job = it->second;
    }
    registry_->try_transition(job.record_id, registry::ModelStatus::Profiling);
    emit("job_state", job_event(job));
    emit("cell_started", json{{"job_id", job_id}, {"cell", cell.str()}, {"device", cell.device}});

    CellReport report;
    report.job_id = job_id;
    report.cell = cell;
    std::optional<registry::ProfilingResult> result;
    std::string error;
    try {
        const auto found = registry_->find_variant(job.variant_id);
        if (!found) throw Error(ErrorCode::NotFound, "variant " + job.variant_id + " no longer exists");
        const auto& record = found->first;
        const int input_dim =
            record.inputs.empty() ? 1 : static_cast<int>(std::max<std::int64_t>(1, record.inputs[0].elements_per_sample()));

        const std::string instance_id = ensure_instance(job, cell);
        const auto inst = dispatcher_->get(instance_id);

        // Resource sampler for the measurement window.
        std::vector<ResourceSample> trace;
        std::mutex trace_mu;
        LoadListener load;
        {
            std::lock_guard lock(mu_);
            load = load_;
        }
        const auto t0 = Clock::now();
        const auto interval = std::chrono::milliseconds(job.sweep.sample_interval_ms);
        if (telemetry_) {
            try {
                telemetry_->sample_instance(instance_id);  // baseline for the cpu delta
            } catch (const Error&) {
            }
        }
        std::jthread sampler([&](std::stop_token st) {
            if (!telemetry_) return;
            std::mutex m;
            std::condition_variable_any cv;
            while (true) {
                {
                    std::unique_lock lock(m);
                    cv.wait_for(lock, st, interval, [] { return false; });
                }
                if (st.stop_requested()) break;
                try {
                    const auto s = telemetry_->sample_instance(instance_id);
                    const auto t_us = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
                    {
                        std::lock_guard lock(trace_mu);
                        trace.push_back({t_us, static_cast<std::int64_t>(s.memory_bytes), s.cpu_fraction});
                    }
                    if (load) load(cell.device, s.cpu_fraction);
                } catch (const Error&) {
                    // Instance gone; the measurement will notice.
                }
            }
        });

        MeasureOptions mo;
        mo.batch_size = cell.batch_size;
        mo.input_dim = input_dim;
        mo.requests = job.sweep.requests_per_cell;
        mo.warmup_requests = job.sweep.warmup_requests;
        mo.concurrency = job.sweep.concurrency;
        mo.connect_timeout = options_.connect_timeout;
        mo.request_timeout = options_.request_timeout;
        mo.max_failure_fraction = options_.max_failure_fraction;
        LatencySamples samples;
        try {
            samples = measure_cell(inst.endpoint, inst.protocol, mo);
        } catch (...) {
            sampler.request_stop();
            sampler.join();
            throw;
        }
        sampler.request_stop();
        sampler.join();

        CellProvenance prov{job.variant_id, cell.device, cell.backend, cell.protocol, cell.batch_size,
                            options_.resource_source};
        result = aggregate(samples, trace, prov);
    } catch (const Error& e) {
        error = std::string(code_name(ErrorCode::CellFailure)) + ": " + std::string(code_name(e.code())) + ": " +
                e.what();
    }
    finish_cell(job_id, cell, std::move(result), error, report);

    // Free the instance once no pending cell of this job needs it.
    bool group_done = true;
    {
        std::lock_guard lock(mu_);
        for (const auto& c : jobs_.at(job_id).remaining_cells()) {
            if (c.device == cell.device && c.backend == cell.backend && c.protocol == cell.protocol) group_done = false;
        }
    }
    if (group_done || !error.empty()) {
        std::optional<std::string> inst;
        {
            std::lock_guard lock(mu_);
            auto& groups = instances_[job_id];
            auto it = groups.find(GroupKey{cell.device, cell.backend, cell.protocol});
            if (it != groups.end()) {
                inst = it->second;
                groups.erase(it);
            }
        }
        if (inst) {
            try {
                dispatcher_->terminate(*inst);
            } catch (const Error&) {
            }
        }
    }
    return report;
}

void Profiler::finish_cell(const std::string& job_id, const CellKey& cell,
                           std::optional<registry::ProfilingResult> result, const std::string& error,
                           CellReport& report) {
    ProfilingJob job;
    {
        std::lock_guard lock(mu_);
        auto& j = jobs_.at(job_id);
        if (result) {
            j.results.push_back(*result);
            j.completed_cells.push_back(cell.str());
        } else {
            j.failed_cells[cell.str()] = error;
        }
        if (j.remaining_cells().empty()) j.state = j.results.empty() ? JobState::Failed : JobState::Completed;
        save_locked(j);
        job = j;
    }
    if (result) {
        try {
            registry_->add_result(job.record_id, *result);
        } catch (const Error&) {
            // Record deleted mid-sweep; the job document keeps the result.
        }
    }
    report.result = result;
    report.error = error;
    report.job_state = job.state;

    json payload{{"job_id", job_id}, {"cell", cell.str()}, {"device", cell.device}, {"ok", result.has_value()}};
    if (result) payload["result"] = *result;
    else payload["error"] = error;
    emit("cell_completed", payload);

    if (job.finished()) {
        if (job.state == JobState::Completed) {
            registry_->try_transition(job.record_id, registry::ModelStatus::Profiled);
        }
        emit("job_state", job_event(job));
    }
}

std::vector<registry::ProfilingResult> Profiler::run_sweep(const std::string& job_id, const Gate& gate) {
    std::vector<registry::ProfilingResult> out;
    while (true) {
        const auto remaining = job(job_id).remaining_cells();
        if (remaining.empty()) break;
        const CellKey& cell = remaining.front();
        if (gate && !gate(cell)) {
            set_state(job_id, JobState::Paused);
            release_instances(job_id);
            break;
        }
        auto report = run_cell(job_id, cell);
        if (report.result) out.push_back(*report.result);
    }
    return out;
}

void Profiler::reconcile() {
    std::vector<ProfilingJob> all = jobs();
    for (auto& job : all) {
        std::optional<registry::ModelRecord> record;
        try {
            record = registry_->get(job.record_id);
        } catch (const Error&) {
        }
        if (record) {
            for (const auto& r : job.results) {
                if (std::find(record->profiling_results.begin(), record->profiling_results.end(), r) ==
                    record->profiling_results.end()) {
                    registry_->add_result(job.record_id, r);
                }
            }
            if (job.state == JobState::Completed) registry_->try_transition(job.record_id, registry::ModelStatus::Profiled);
        }
        if (job.state == JobState::Running) {
            std::lock_guard lock(mu_);
            auto& j = jobs_.at(job.id);
            j.state = JobState::Queued;
            save_locked(j);
        }
    }
}

}  // namespace modelci::profiler
