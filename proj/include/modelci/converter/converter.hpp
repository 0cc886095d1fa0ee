// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modelci/error.hpp"
#include "modelci/registry/registry.hpp"

namespace modelci::converter {

enum class PluginKind { Builtin, ExternalCommand };

std::string_view to_string(PluginKind kind) noexcept;
PluginKind parse_plugin_kind(std::string_view text);

// Builtin transforms, selected by ConverterPlugin::builtin.
inline constexpr std::string_view kBuiltinPassthrough = "passthrough";
inline constexpr std::string_view kBuiltinToyJson = "toy-json";
inline constexpr std::string_view kBuiltinToyBinary = "toy-binary";

struct ConverterPlugin {
    std::string source_framework;
    std::string target_format;
    PluginKind kind = PluginKind::Builtin;
    std::string builtin;           // builtin only
    std::string command_template;  // external only; must mention {input} and {output}
    std::vector<std::string> produces_backends;

    // Throws Error(InvalidPlugin).
    void validate() const;
};

struct ConversionStep {
    ConverterPlugin plugin;
    std::string target_format;
};

struct ConversionPlan {
    std::string record_id;
    std::vector<ConversionStep> steps;
};

// Plugins keyed by (source framework, target format).
class PluginRegistry {
public:
    void register_plugin(ConverterPlugin plugin);
    std::optional<ConverterPlugin> find(const std::string& source, const std::string& target) const;
    // Every plugin for `source`, ordered by target format.
    std::vector<ConverterPlugin> for_source(const std::string& source) const;
    std::vector<ConverterPlugin> all() const;

private:
    mutable std::mutex mu_;
    std::map<std::pair<std::string, std::string>, ConverterPlugin> plugins_;
};

// toy -> toy-json (passthrough) and toy -> toy-binary, both served by mockserve.
std::vector<ConverterPlugin> default_plugins();

struct ConverterOptions {
    std::chrono::milliseconds timeout{std::chrono::seconds(300)};
    std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "modelci-convert";
};

struct StepFailure {
    std::string target_format;
    ErrorCode code = ErrorCode::PluginFailure;
    std::string message;
};

struct ConversionOutcome {
    std::vector<registry::ModelVariant> variants;
    std::vector<StepFailure> failures;
};

// Applies a pure builtin transform to source bytes.
std::string run_builtin(const std::string& name, std::string_view input);

class Converter {
public:
    Converter(registry::Registry& registry, std::shared_ptr<PluginRegistry> plugins,
              ConverterOptions options = {});

    // Empty `targets` selects every plugin for the record's framework.
    // Throws UnsupportedConversion when a requested target has no plugin.
    ConversionPlan plan(const registry::ModelRecord& record,
                        const std::vector<std::string>& targets) const;

    // Single conversion; moves the record through converting -> converted
    // (or failed) when it starts from registered/failed.
    registry::ModelVariant convert(const std::string& record_id, const std::string& target_format);

    // Runs every step; one success is enough for the record to end converted.
    ConversionOutcome run_plan(const ConversionPlan& plan);

    PluginRegistry& plugins() noexcept { return *plugins_; }

private:
    registry::ModelVariant execute(const registry::ModelRecord& record, const ConversionStep& step);
    std::string run_external(const ConverterPlugin& plugin, std::string_view input);
    std::shared_ptr<std::mutex> record_lock(const std::string& record_id);
    bool begin(const std::string& record_id);

    registry::Registry& registry_;
    std::shared_ptr<PluginRegistry> plugins_;
    ConverterOptions options_;
    std::mutex locks_mu_;
    std::map<std::string, std::shared_ptr<std::mutex>> record_locks_;
};

}  // namespace modelci::converter
