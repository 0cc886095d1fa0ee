// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/gateway/config.hpp"

#include <cstdlib>

#include <yaml-cpp/yaml.h>

#include "modelci/error.hpp"
#include "modelci/util/fs.hpp"

namespace modelci::gateway {

using json = nlohmann::json;

namespace {

json to_json_node(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Sequence: {
            json out = json::array();
            for (const auto& item : node) out.push_back(to_json_node(item));
            return out;
        }
        case YAML::NodeType::Map: {
            json out = json::object();
            for (const auto& kv : node) out[kv.first.as<std::string>()] = to_json_node(kv.second);
            return out;
        }
        case YAML::NodeType::Scalar:
            break;
    }
    const auto text = node.as<std::string>();
    if (node.Tag() == "!") return text;  // quoted scalar
    if (text == "true" || text == "false") return text == "true";
    if (text == "null" || text == "~") return nullptr;
    // Plain scalars that parse fully as numbers become numbers.
    char* end = nullptr;
    const long long i = std::strtoll(text.c_str(), &end, 10);
    if (!text.empty() && *end == '\0') return i;
    const double d = std::strtod(text.c_str(), &end);
    if (!text.empty() && *end == '\0') return d;
    return text;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal();
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    return obj.at(key).get<T>();
}

converter::ConverterPlugin parse_plugin(const json& j) {
    converter::ConverterPlugin p;
    p.source_framework = j.at("source_framework").get<std::string>();
    p.target_format = j.at("target_format").get<std::string>();
    p.kind = converter::parse_plugin_kind(get_or<std::string>(j, "kind", "external"));
    p.builtin = get_or<std::string>(j, "builtin", "");
    p.command_template = get_or<std::string>(j, "command", "");
    p.produces_backends = get_or<std::vector<std::string>>(j, "produces_backends", {});
    p.validate();
    return p;
}

}  // namespace

json yaml_to_json(const std::string& yaml_text) {
    try {
        return to_json_node(YAML::Load(yaml_text));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config is not valid YAML: ") + e.what());
    }
}

void DaemonConfig::validate() const {
    controller.validate();
    auto sweep = profiling;  // empty device/backend lists are filled per request
    if (sweep.devices.empty()) sweep.devices = {"*"};
    if (sweep.backends.empty()) sweep.backends = {"*"};
    sweep.validate();
    if (bind_port < 0 || bind_port > 65535) {
        throw Error(ErrorCode::InvalidArgument, "bind port out of range", {{"port", std::to_string(bind_port)}});
    }
    if (telemetry.provider != "host" && telemetry.provider != "synthetic") {
        throw Error(ErrorCode::InvalidArgument, "telemetry.provider must be host or synthetic",
                    {{"provider", telemetry.provider}});
    }
    if (telemetry.provider == "synthetic" && telemetry.trace.empty()) {
        throw Error(ErrorCode::InvalidArgument, "synthetic telemetry needs telemetry.trace");
    }
    if (telemetry.interval < std::chrono::milliseconds(10)) {
        throw Error(ErrorCode::InvalidArgument, "telemetry.interval_ms must be at least 10");
    }
}

DaemonConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
    const json doc = yaml_to_json(yaml_text);
    DaemonConfig c;
    if (doc.is_null()) return c;
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a mapping");
    try {
        if (doc.contains("store_path")) c.store_path = resolve(base_dir, doc.at("store_path").get<std::string>());
        if (doc.contains("runtime_dir")) c.runtime_dir = resolve(base_dir, doc.at("runtime_dir").get<std::string>());
        if (doc.contains("bind")) {
            const auto bind = doc.at("bind").get<std::string>();
            const auto colon = bind.rfind(':');
            if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "bind must be host:port");
            c.bind_host = bind.substr(0, colon);
            c.bind_port = std::stoi(bind.substr(colon + 1));
        }
        if (const auto& t = doc.value("telemetry", json::object()); t.is_object()) {
            c.telemetry.provider = get_or<std::string>(t, "provider", c.telemetry.provider);
            if (t.contains("trace")) c.telemetry.trace = resolve(base_dir, t.at("trace").get<std::string>());
            c.telemetry.realtime = get_or<bool>(t, "realtime", c.telemetry.realtime);
            c.telemetry.interval = std::chrono::milliseconds(get_or<long long>(t, "interval_ms", c.telemetry.interval.count()));
        }
        if (const auto& k = doc.value("controller", json::object()); k.is_object()) {
            c.controller.idle_threshold = get_or<double>(k, "idle_threshold", c.controller.idle_threshold);
            c.controller.consecutive_samples = get_or<int>(k, "consecutive_samples", c.controller.consecutive_samples);
        }
        if (const auto& p = doc.value("profiling", json::object()); p.is_object()) {
            json merged = c.profiling;
            for (const auto& [key, value] : p.items()) merged[key] = value;
            c.profiling = merged.get<profiler::SweepSpec>();
        }
        if (const auto& d = doc.value("dispatcher", json::object()); d.is_object()) {
            if (d.contains("mockserve")) {
                const auto m = d.at("mockserve").get<std::string>();
                // A bare name is looked up on PATH; anything with a slash is a path.
                c.mockserve_path = m.find('/') == std::string::npos ? m : resolve(base_dir, m).string();
            }
            c.mockserve_args = get_or<std::vector<std::string>>(d, "mockserve_args", {});
            c.ready_timeout = std::chrono::milliseconds(get_or<long long>(d, "ready_timeout_ms", c.ready_timeout.count()));
            c.health_interval =
                std::chrono::milliseconds(get_or<long long>(d, "health_interval_ms", c.health_interval.count()));
            c.container_runtime = get_or<std::string>(d, "container_runtime", c.container_runtime);
        }
        for (const auto& p : doc.value("plugins", json::array())) c.plugins.push_back(parse_plugin(p));
        for (const auto& b : doc.value("backends", json::array())) c.backends.push_back(dispatcher::parse_backend_template(b));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error(ErrorCode::InvalidArgument, "bad port in bind");
    } catch (const std::out_of_range&) {
        throw Error(ErrorCode::InvalidArgument, "bad port in bind");
    }
    if (c.runtime_dir.empty()) c.runtime_dir = c.store_path / "runtime";
    c.validate();
    return c;
}

DaemonConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const Error&) {
        throw Error(ErrorCode::InvalidArgument, "cannot read config file", {{"path", path.string()}});
    }
    return parse_config(text, std::filesystem::absolute(path).parent_path());
}

std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& explicit_path) {
    if (explicit_path) return explicit_path;
    if (const char* env = std::getenv("MODELCI_CONFIG"); env != nullptr && *env != '\0') {
        return std::filesystem::path(env);
    }
    return std::nullopt;
}

}  // namespace modelci::gateway
