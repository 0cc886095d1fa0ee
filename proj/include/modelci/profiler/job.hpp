// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "modelci/registry/store.hpp"
#include "modelci/registry/types.hpp"
#include "modelci/util/time.hpp"

namespace modelci::profiler {

struct SweepSpec {
    std::vector<int> batch_sizes = {1, 2, 4, 8, 16, 32};
    std::vector<std::string> devices;
    std::vector<std::string> backends;
    std::vector<std::string> protocols = {"rest"};
    int requests_per_cell = 100;
    int warmup_requests = 10;
    int concurrency = 1;
    int sample_interval_ms = 100;

    // Throws Error(InvalidArgument).
    void validate() const;
    bool operator==(const SweepSpec&) const = default;
};

void to_json(nlohmann::json& j, const SweepSpec& s);
void from_json(const nlohmann::json& j, SweepSpec& s);

// One (device, backend, protocol, batch size) combination.
struct CellKey {
    std::string device;
    std::string backend;
    std::string protocol;
    int batch_size = 0;

    std::string str() const;  // "device/backend/protocol/b<batch>"
    auto operator<=>(const CellKey&) const = default;
    bool operator==(const CellKey&) const = default;
};

CellKey cell_of(const registry::ProfilingResult& r);

// The sweep's cross-product in (device, backend, protocol, batch_size)
// order, each list first sorted and de-duplicated. Batch sizes compare
// numerically.
std::vector<CellKey> enumerate_cells(const SweepSpec& spec);

enum class JobState { Queued, WaitingForDevice, Running, Paused, Completed, Failed };
std::string_view to_string(JobState s) noexcept;
JobState parse_job_state(std::string_view text);

struct ProfilingJob {
    std::string id;
    std::string variant_id;
    std::string record_id;
    SweepSpec sweep;
    JobState state = JobState::Queued;
    std::vector<std::string> completed_cells;        // in completion order
    std::map<std::string, std::string> failed_cells;  // cell -> reason
    std::vector<registry::ProfilingResult> results;
    util::Timestamp created_at{};
    util::Timestamp updated_at{};
    // Submission order among jobs; restored on restart to keep FIFO.
    std::int64_t sequence = 0;

    bool cell_done(const CellKey& cell) const;
    // Cells still to run, in sweep order.
    std::vector<CellKey> remaining_cells() const;
    bool finished() const { return state == JobState::Completed || state == JobState::Failed; }
};

void to_json(nlohmann::json& j, const ProfilingJob& job);
void from_json(const nlohmann::json& j, ProfilingJob& job);

// Jobs persisted as documents in the store's "jobs" collection.
class JobStore {
public:
    static constexpr const char* kCollection = "jobs";

    explicit JobStore(std::shared_ptr<registry::Store> store);

    void save(const ProfilingJob& job);
    std::optional<ProfilingJob> load(const std::string& id) const;
    // Sorted by sequence.
    std::vector<ProfilingJob> list() const;
    void remove(const std::string& id);

private:
    std::shared_ptr<registry::Store> store_;
};

// One CSV row per result: provenance columns, then the six indicators.
std::string results_csv(const std::vector<registry::ProfilingResult>& results);

}  // namespace modelci::profiler
