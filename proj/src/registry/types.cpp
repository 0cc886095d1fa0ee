// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/registry/types.hpp"

#include <yaml-cpp/yaml.h>

#include <array>

#include "modelci/error.hpp"

using nlohmann::json;

namespace modelci::registry {

namespace {

constexpr std::array<std::pair<ModelStatus, std::string_view>, 7> kStatusNames{{
    {ModelStatus::Registered, "registered"},
    {ModelStatus::Converting, "converting"},
    {ModelStatus::Converted, "converted"},
    {ModelStatus::Profiling, "profiling"},
    {ModelStatus::Profiled, "profiled"},
    {ModelStatus::Serving, "serving"},
    {ModelStatus::Failed, "failed"},
}};

[[noreturn]] void bad_manifest(const std::string& msg) {
    throw Error(ErrorCode::InvalidManifest, msg);
}

TensorSpec tensor_from_yaml(const YAML::Node& node) {
    if (!node.IsMap()) bad_manifest("tensor spec must be a mapping");
    TensorSpec t;
    t.name = node["name"].as<std::string>("");
    t.dtype = node["dtype"].as<std::string>("float32");
    const auto shape = node["shape"];
    if (!shape || !shape.IsSequence()) bad_manifest("tensor '" + t.name + "' needs a shape list");
    for (const auto& d : shape) t.shape.push_back(d.as<std::int64_t>());
    return t;
}

}  // namespace

std::string_view to_string(ModelStatus status) noexcept {
    for (const auto& [s, name] : kStatusNames) {
        if (s == status) return name;
    }
    return "failed";
}

ModelStatus parse_status(std::string_view text) {
    for (const auto& [s, name] : kStatusNames) {
        if (name == text) return s;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown status '" + std::string(text) + "'");
}

bool is_legal_transition(ModelStatus from, ModelStatus to) noexcept {
    using S = ModelStatus;
    if (to == S::Failed) return from != S::Failed;
    switch (from) {
        case S::Registered: return to == S::Converting;
        case S::Converting: return to == S::Converted;
        case S::Converted: return to == S::Profiling;
        case S::Profiling: return to == S::Profiled;
        case S::Profiled: return to == S::Serving;
        case S::Serving: return false;
        case S::Failed: return to == S::Converting;
    }
    return false;
}

void TensorSpec::validate() const {
    if (shape.empty()) bad_manifest("tensor '" + name + "' has an empty shape");
    int dynamic = 0;
    for (const auto d : shape) {
        if (d == -1) {
            ++dynamic;
        } else if (d < 1) {
            bad_manifest("tensor '" + name + "' has a non-positive dimension");
        }
    }
    if (dynamic > 1) bad_manifest("tensor '" + name + "' has more than one dynamic dimension");
}

std::int64_t TensorSpec::elements_per_sample() const {
    std::int64_t n = 1;
    for (const auto d : shape) {
        if (d > 0) n *= d;
    }
    return n;
}

void RegistrationManifest::validate() const {
    if (name.empty()) bad_manifest("manifest 'name' is required");
    if (framework.empty()) bad_manifest("manifest 'framework' is required");
    if (version && *version < 1) bad_manifest("manifest 'version' must be positive");
    if (inputs.empty()) bad_manifest("manifest needs at least one input");
    for (const auto& t : inputs) t.validate();
    for (const auto& t : outputs) t.validate();
}

RegistrationManifest parse_manifest(const std::string& yaml_text) {
    RegistrationManifest m;
    try {
        const YAML::Node root = YAML::Load(yaml_text);
        if (!root.IsMap()) bad_manifest("manifest must be a YAML mapping");
        m.name = root["name"].as<std::string>("");
        m.framework = root["framework"].as<std::string>("");
        if (root["version"] && !root["version"].IsNull()) m.version = root["version"].as<int>();
        m.task = root["task"].as<std::string>("");
        m.dataset = root["dataset"].as<std::string>("");
        if (const auto metrics = root["metrics"]; metrics && metrics.IsMap()) {
            for (const auto& kv : metrics) {
                m.metrics[kv.first.as<std::string>()] = kv.second.as<double>();
            }
        }
        if (const auto inputs = root["inputs"]; inputs && inputs.IsSequence()) {
            for (const auto& t : inputs) m.inputs.push_back(tensor_from_yaml(t));
        }
        if (const auto outputs = root["outputs"]; outputs && outputs.IsSequence()) {
            for (const auto& t : outputs) m.outputs.push_back(tensor_from_yaml(t));
        }
        m.convert = root["convert"].as<bool>(true);
        m.profile = root["profile"].as<bool>(true);
    } catch (const YAML::Exception& e) {
        bad_manifest(std::string("manifest is not valid YAML: ") + e.what());
    }
    m.validate();
    return m;
}

bool ModelQuery::matches(const ModelRecord& r) const {
    return (!name || r.name == *name) && (!framework || r.framework == *framework) &&
           (!task || r.task == *task) && (!status || r.status == *status);
}

RecordPatch parse_patch(const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "patch must be an object");
    RecordPatch patch;
    for (const auto& [key, value] : body.items()) {
        if (key == "task") {
            patch.task = value.get<std::string>();
        } else if (key == "dataset") {
            patch.dataset = value.get<std::string>();
        } else if (key == "metrics") {
            patch.metrics = value.get<std::map<std::string, double>>();
        } else if (key == "status") {
            patch.status = parse_status(value.get<std::string>());
        } else if (key == "id" || key == "name" || key == "framework" || key == "version" ||
                   key == "weight_digest" || key == "created_at" || key == "updated_at" ||
                   key == "inputs" || key == "outputs" || key == "variants" ||
                   key == "profiling_results") {
            throw Error(ErrorCode::ImmutableField, "field '" + key + "' is immutable",
                        {{"field", key}});
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown field '" + key + "'");
        }
    }
    return patch;
}

void to_json(json& j, const TensorSpec& t) {
    j = json{{"name", t.name}, {"shape", t.shape}, {"dtype", t.dtype}};
}

void from_json(const json& j, TensorSpec& t) {
    t.name = j.at("name").get<std::string>();
    t.shape = j.at("shape").get<std::vector<std::int64_t>>();
    t.dtype = j.value("dtype", "float32");
}

void to_json(json& j, const ModelVariant& v) {
    j = json{{"id", v.id},
             {"parent_id", v.parent_id},
             {"format", v.format},
             {"blob_digest", v.blob_digest},
             {"serving_backends", v.serving_backends},
             {"created_at", util::format_timestamp(v.created_at)}};
}

void from_json(const json& j, ModelVariant& v) {
    v.id = j.at("id").get<std::string>();
    v.parent_id = j.at("parent_id").get<std::string>();
    v.format = j.at("format").get<std::string>();
    v.blob_digest = j.at("blob_digest").get<std::string>();
    v.serving_backends = j.at("serving_backends").get<std::vector<std::string>>();
    v.created_at = util::parse_timestamp(j.at("created_at").get<std::string>());
}

void to_json(json& j, const ProfilingResult& r) {
    j = json{{"variant_id", r.variant_id},
             {"device", r.device},
             {"backend", r.backend},
             {"protocol", r.protocol},
             {"batch_size", r.batch_size},
             {"peak_throughput", r.peak_throughput},
             {"p50_latency_ms", r.p50_latency_ms},
             {"p95_latency_ms", r.p95_latency_ms},
             {"p99_latency_ms", r.p99_latency_ms},
             {"memory_bytes", r.memory_bytes ? json(*r.memory_bytes) : json(nullptr)},
             {"utilization", r.utilization ? json(*r.utilization) : json(nullptr)},
             {"measured_at", util::format_timestamp(r.measured_at)},
             {"raw_sample_count", r.raw_sample_count},
             {"degraded", r.degraded},
             {"resource_source", r.resource_source}};
}

void from_json(const json& j, ProfilingResult& r) {
    r.variant_id = j.at("variant_id").get<std::string>();
    r.device = j.at("device").get<std::string>();
    r.backend = j.at("backend").get<std::string>();
    r.protocol = j.at("protocol").get<std::string>();
    r.batch_size = j.at("batch_size").get<int>();
    r.peak_throughput = j.at("peak_throughput").get<double>();
    r.p50_latency_ms = j.at("p50_latency_ms").get<double>();
    r.p95_latency_ms = j.at("p95_latency_ms").get<double>();
    r.p99_latency_ms = j.at("p99_latency_ms").get<double>();
    r.memory_bytes.reset();
    r.utilization.reset();
    if (const auto& m = j.at("memory_bytes"); !m.is_null()) r.memory_bytes = m.get<std::int64_t>();
    if (const auto& u = j.at("utilization"); !u.is_null()) r.utilization = u.get<double>();
    r.measured_at = util::parse_timestamp(j.at("measured_at").get<std::string>());
    r.raw_sample_count = j.at("raw_sample_count").get<std::int64_t>();
    r.degraded = j.value("degraded", false);
    r.resource_source = j.value("resource_source", "");
}

void to_json(json& j, const ModelRecord& r) {
    j = json{{"id", r.id},
             {"name", r.name},
             {"framework", r.framework},
             {"version", r.version},
             {"task", r.task},
             {"dataset", r.dataset},
             {"metrics", r.metrics},
             {"inputs", r.inputs},
             {"outputs", r.outputs},
             {"weight_digest", r.weight_digest},
             {"status", to_string(r.status)},
             {"created_at", util::format_timestamp(r.created_at)},
             {"updated_at", util::format_timestamp(r.updated_at)},
             {"variants", r.variants},
             {"profiling_results", r.profiling_results}};
}

void from_json(const json& j, ModelRecord& r) {
    r.id = j.at("id").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.framework = j.at("framework").get<std::string>();
    r.version = j.at("version").get<int>();
    r.task = j.value("task", "");
    r.dataset = j.value("dataset", "");
    r.metrics = j.value("metrics", std::map<std::string, double>{});
    r.inputs = j.at("inputs").get<std::vector<TensorSpec>>();
    r.outputs = j.value("outputs", std::vector<TensorSpec>{});
    r.weight_digest = j.at("weight_digest").get<std::string>();
    r.status = parse_status(j.at("status").get<std::string>());
    r.created_at = util::parse_timestamp(j.at("created_at").get<std::string>());
    r.updated_at = util::parse_timestamp(j.at("updated_at").get<std::string>());
    r.variants = j.value("variants", std::vector<ModelVariant>{});
    r.profiling_results = j.value("profiling_results", std::vector<ProfilingResult>{});
}

}  // namespace modelci::registry
