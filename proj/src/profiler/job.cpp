// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/profiler/job.hpp"

#include <algorithm>
#include <charconv>

#include "modelci/error.hpp"

namespace modelci::profiler {

using json = nlohmann::json;

void SweepSpec::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, "sweep: " + msg); };
    if (batch_sizes.empty() || devices.empty() || backends.empty() || protocols.empty()) {
        fail("batch_sizes, devices, backends and protocols must be non-empty");
    }
    for (int b : batch_sizes) {
        if (b <= 0) fail("batch sizes must be positive");
    }
    for (const auto& p : protocols) {
        if (p != "rest" && p != "grpc-style") fail("unknown protocol '" + p + "'");
    }
    if (requests_per_cell < 10) fail("requests_per_cell must be >= 10");
    if (warmup_requests < 0) fail("warmup_requests must be >= 0");
    if (concurrency < 1) fail("concurrency must be >= 1");
    if (sample_interval_ms < 10) fail("sample_interval_ms must be >= 10");
}

void to_json(json& j, const SweepSpec& s) {
    j = json{{"batch_sizes", s.batch_sizes},
             {"devices", s.devices},
             {"backends", s.backends},
             {"protocols", s.protocols},
             {"requests_per_cell", s.requests_per_cell},
             {"warmup_requests", s.warmup_requests},
             {"concurrency", s.concurrency},
             {"sample_interval_ms", s.sample_interval_ms}};
}

void from_json(const json& j, SweepSpec& s) {
    SweepSpec d;
    s.batch_sizes = j.value("batch_sizes", d.batch_sizes);
    s.devices = j.value("devices", d.devices);
    s.backends = j.value("backends", d.backends);
    s.protocols = j.value("protocols", d.protocols);
    s.requests_per_cell = j.value("requests_per_cell", d.requests_per_cell);
    s.warmup_requests = j.value("warmup_requests", d.warmup_requests);
    s.concurrency = j.value("concurrency", d.concurrency);
    s.sample_interval_ms = j.value("sample_interval_ms", d.sample_interval_ms);
}

std::string CellKey::str() const {
    return device + "/" + backend + "/" + protocol + "/b" + std::to_string(batch_size);
}

CellKey cell_of(const registry::ProfilingResult& r) { return {r.device, r.backend, r.protocol, r.batch_size}; }

std::vector<CellKey> enumerate_cells(const SweepSpec& spec) {
    auto uniq = [](auto v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    std::vector<CellKey> cells;
    for (const auto& d : uniq(spec.devices))
        for (const auto& b : uniq(spec.backends))
            for (const auto& p : uniq(spec.protocols))
                for (int n : uniq(spec.batch_sizes)) cells.push_back({d, b, p, n});
    return cells;
}

std::string_view to_string(JobState s) noexcept {
    switch (s) {
        case JobState::Queued: return "queued";
        case JobState::WaitingForDevice: return "waiting_for_device";
        case JobState::Running: return "running";
        case JobState::Paused: return "paused";
        case JobState::Completed: return "completed";
        case JobState::Failed: return "failed";
    }
    return "unknown";
}

JobState parse_job_state(std::string_view text) {
    for (JobState s : {JobState::Queued, JobState::WaitingForDevice, JobState::Running, JobState::Paused,
                       JobState::Completed, JobState::Failed}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown job state '" + std::string(text) + "'");
}

bool ProfilingJob::cell_done(const CellKey& cell) const {
    const auto key = cell.str();
    return failed_cells.count(key) ||
           std::find(completed_cells.begin(), completed_cells.end(), key) != completed_cells.end();
}

std::vector<CellKey> ProfilingJob::remaining_cells() const {
    std::vector<CellKey> out;
    for (auto& c : enumerate_cells(sweep)) {
        if (!cell_done(c)) out.push_back(std::move(c));
    }
    return out;
}

void to_json(json& j, const ProfilingJob& job) {
    j = json{{"id", job.id},
             {"variant_id", job.variant_id},
             {"record_id", job.record_id},
             {"sweep", job.sweep},
             {"state", to_string(job.state)},
             {"completed_cells", job.completed_cells},
             {"failed_cells", job.failed_cells},
             {"results", job.results},
             {"total_cells", enumerate_cells(job.sweep).size()},
             {"created_at", util::format_timestamp(job.created_at)},
             {"updated_at", util::format_timestamp(job.updated_at)},
             {"sequence", job.sequence}};
}

void from_json(const json& j, ProfilingJob& job) {
    job.id = j.at("id").get<std::string>();
    job.variant_id = j.at("variant_id").get<std::string>();
    job.record_id = j.value("record_id", "");
    job.sweep = j.at("sweep").get<SweepSpec>();
    job.state = parse_job_state(j.at("state").get<std::string>());
    job.completed_cells = j.value("completed_cells", std::vector<std::string>{});
    job.failed_cells = j.value("failed_cells", std::map<std::string, std::string>{});
    job.results = j.value("results", std::vector<registry::ProfilingResult>{});
    job.created_at = util::parse_timestamp(j.at("created_at").get<std::string>());
    job.updated_at = util::parse_timestamp(j.at("updated_at").get<std::string>());
    job.sequence = j.value("sequence", std::int64_t{0});
}

JobStore::JobStore(std::shared_ptr<registry::Store> store) : store_(std::move(store)) {}

void JobStore::save(const ProfilingJob& job) { store_->put_document(kCollection, job.id, json(job).dump()); }

std::optional<ProfilingJob> JobStore::load(const std::string& id) const {
    auto doc = store_->get_document(kCollection, id);
    if (!doc) return std::nullopt;
    try {
        return json::parse(*doc).get<ProfilingJob>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::StorageFailure, "job " + id + " is unreadable: " + e.what());
    }
}

std::vector<ProfilingJob> JobStore::list() const {
    std::vector<ProfilingJob> out;
    for (const auto& id : store_->list_documents(kCollection)) {
        if (auto job = load(id)) out.push_back(std::move(*job));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.sequence, a.created_at, a.id) < std::tie(b.sequence, b.created_at, b.id);
    });
    return out;
}

void JobStore::remove(const std::string& id) { store_->delete_document(kCollection, id); }

namespace {

std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string results_csv(const std::vector<registry::ProfilingResult>& results) {
    std::string out =
        "variant_id,device,backend,protocol,batch_size,peak_throughput,p50_latency_ms,p95_latency_ms,"
        "p99_latency_ms,memory_bytes,utilization,measured_at,raw_sample_count,degraded,resource_source\n";
    for (const auto& r : results) {
        out += csv_field(r.variant_id) + ',' + csv_field(r.device) + ',' + csv_field(r.backend) + ',' +
               csv_field(r.protocol) + ',' + std::to_string(r.batch_size) + ',' + fmt(r.peak_throughput) + ',' +
               fmt(r.p50_latency_ms) + ',' + fmt(r.p95_latency_ms) + ',' + fmt(r.p99_latency_ms) + ',' +
               (r.memory_bytes ? std::to_string(*r.memory_bytes) : "") + ',' +
               (r.utilization ? fmt(*r.utilization) : "") + ',' + util::format_timestamp(r.measured_at) + ',' +
               std::to_string(r.raw_sample_count) + ',' + (r.degraded ? "true" : "false") + ',' +
               csv_field(r.resource_source) + '\n';
    }
    return out;
}

}  // namespace modelci::profiler
