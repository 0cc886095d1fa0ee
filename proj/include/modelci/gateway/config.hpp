// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modelci/controller/scheduler.hpp"
#include "modelci/converter/converter.hpp"
#include "modelci/dispatcher/backend.hpp"
#include "modelci/profiler/job.hpp"

namespace modelci::gateway {

struct TelemetryConfig {
    std::string provider = "host";  // host | synthetic
    std::filesystem::path trace;     // synthetic only
    bool realtime = true;            // synthetic: replay by wall time, else one group per sample
    std::chrono::milliseconds interval{1000};
};

struct DaemonConfig {
    std::filesystem::path store_path = "modelci-data";
    std::filesystem::path runtime_dir;  // defaults to <store_path>/runtime
    std::string bind_host = "127.0.0.1";
    int bind_port = 8765;

    TelemetryConfig telemetry;
    controller::ControllerConfig controller;

    // Defaults for profiling requests; empty devices/backends mean "every
    // known device" and "every backend that accepts the variant".
    profiler::SweepSpec profiling;

    std::string mockserve_path = "modelci-mockserve";
    std::vector<std::string> mockserve_args;  // appended to the mockserve backend command
    std::chrono::milliseconds ready_timeout{30000};
    std::chrono::milliseconds health_interval{1000};
    std::string container_runtime = "docker";

    // Extra converter plugins and serving backends on top of the defaults.
    std::vector<converter::ConverterPlugin> plugins;
    std::vector<dispatcher::ServingBackendTemplate> backends;

    // Throws Error(InvalidArgument).
    void validate() const;
};

// Relative paths resolve against `base_dir`. Throws InvalidArgument.
DaemonConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir = {});
DaemonConfig load_config(const std::filesystem::path& path);

// Config file to use: the explicit path if given, else $MODELCI_CONFIG,
// else nothing (built-in defaults).
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::filesystem::path>& explicit_path);

nlohmann::json yaml_to_json(const std::string& yaml_text);

}  // namespace modelci::gateway
