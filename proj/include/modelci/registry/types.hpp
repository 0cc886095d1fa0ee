// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "modelci/util/time.hpp"

namespace modelci::registry {

enum class ModelStatus { Registered, Converting, Converted, Profiling, Profiled, Serving, Failed };

std::string_view to_string(ModelStatus status) noexcept;
ModelStatus parse_status(std::string_view text);

// registered -> converting -> converted -> profiling -> profiled -> serving,
// failed from any non-terminal state, and failed -> converting as a retry.
bool is_legal_transition(ModelStatus from, ModelStatus to) noexcept;

struct TensorSpec {
    std::string name;
    std::vector<std::int64_t> shape;  // -1 marks the dynamic batch dimension
    std::string dtype;

    // At most one -1; every other dimension >= 1. Throws InvalidManifest.
    void validate() const;
    // Product of the non-batch dimensions.
    std::int64_t elements_per_sample() const;

    bool operator==(const TensorSpec&) const = default;
};

struct ModelVariant {
    std::string id;
    std::string parent_id;
    std::string format;
    std::string blob_digest;
    std::vector<std::string> serving_backends;
    util::Timestamp created_at{};

    bool operator==(const ModelVariant&) const = default;
};

// One sweep cell's measurements. memory/utilization are empty when no
// resource trace was captured (the result is then flagged degraded).
struct ProfilingResult {
    std::string variant_id;
    std::string device;
    std::string backend;
    std::string protocol;
    int batch_size = 0;
    double peak_throughput = 0;
    double p50_latency_ms = 0;
    double p95_latency_ms = 0;
    double p99_latency_ms = 0;
    std::optional<std::int64_t> memory_bytes;
    std::optional<double> utilization;
    util::Timestamp measured_at{};
    std::int64_t raw_sample_count = 0;
    bool degraded = false;
    // What the memory/utilization fields actually measured, e.g.
    // "process-rss/cpu" on hosts without an accelerator collector.
    std::string resource_source;

    bool operator==(const ProfilingResult&) const = default;
};

struct ModelRecord {
    std::string id;
    std::string name;
    std::string framework;
    int version = 0;
    std::string task;
    std::string dataset;
    std::map<std::string, double> metrics;
    std::vector<TensorSpec> inputs;
    std::vector<TensorSpec> outputs;
    std::string weight_digest;
    ModelStatus status = ModelStatus::Registered;
    util::Timestamp created_at{};
    util::Timestamp updated_at{};
    std::vector<ModelVariant> variants;
    std::vector<ProfilingResult> profiling_results;

    bool operator==(const ModelRecord&) const = default;
};

struct RegistrationManifest {
    std::string name;
    std::string framework;
    std::optional<int> version;
    std::string task;
    std::string dataset;
    std::map<std::string, double> metrics;
    std::vector<TensorSpec> inputs;
    std::vector<TensorSpec> outputs;
    bool convert = true;
    bool profile = true;

    void validate() const;
};

// Parses the YAML registration manifest. Throws InvalidManifest.
RegistrationManifest parse_manifest(const std::string& yaml_text);

struct ModelQuery {
    std::optional<std::string> name;
    std::optional<std::string> framework;
    std::optional<std::string> task;
    std::optional<ModelStatus> status;

    bool matches(const ModelRecord& record) const;
};

// Mutable subset of a record. Built from a JSON patch by parse_patch(), which
// rejects immutable keys with ImmutableField.
struct RecordPatch {
    std::optional<std::string> task;
    std::optional<std::string> dataset;
    std::optional<std::map<std::string, double>> metrics;  // merged key-wise
    std::optional<ModelStatus> status;
};

RecordPatch parse_patch(const nlohmann::json& body);

void to_json(nlohmann::json& j, const TensorSpec& t);
void from_json(const nlohmann::json& j, TensorSpec& t);
void to_json(nlohmann::json& j, const ModelVariant& v);
void from_json(const nlohmann::json& j, ModelVariant& v);
void to_json(nlohmann::json& j, const ProfilingResult& r);
void from_json(const nlohmann::json& j, ProfilingResult& r);
void to_json(nlohmann::json& j, const ModelRecord& r);
void from_json(const nlohmann::json& j, ModelRecord& r);

}  // namespace modelci::registry
