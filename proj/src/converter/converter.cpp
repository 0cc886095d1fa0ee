// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/converter/converter.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <fstream>

#include "modelci/converter/toy_model.hpp"
#include "modelci/error.hpp"
#include "modelci/util/fs.hpp"
#include "modelci/util/id.hpp"
#include "modelci/util/process.hpp"

namespace fs = std::filesystem;

namespace modelci::converter {

using registry::ModelRecord;
using registry::ModelStatus;
using registry::ModelVariant;

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (const char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('\'');
    return out;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = text.find(from, pos)) != std::string::npos; pos += to.size()) {
        text.replace(pos, from.size(), to);
    }
    return text;
}

std::string log_tail(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return {};
    std::string text = util::read_file(path);
    if (text.size() > 400) text = "..." + text.substr(text.size() - 400);
    while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
    return text;
}

}  // namespace

std::string_view to_string(PluginKind kind) noexcept {
    return kind == PluginKind::Builtin ? "builtin" : "external-command";
}

PluginKind parse_plugin_kind(std::string_view text) {
    if (text == "builtin") return PluginKind::Builtin;
    if (text == "external-command" || text == "external") return PluginKind::ExternalCommand;
    throw Error(ErrorCode::InvalidPlugin, "unknown plugin kind '" + std::string(text) + "'");
}

void ConverterPlugin::validate() const {
    if (source_framework.empty() || target_format.empty()) {
        throw Error(ErrorCode::InvalidPlugin, "plugin needs a source framework and target format");
    }
    if (kind == PluginKind::ExternalCommand) {
        if (command_template.find("{input}") == std::string::npos ||
            command_template.find("{output}") == std::string::npos) {
            throw Error(ErrorCode::InvalidPlugin,
                        "command template must contain {input} and {output} placeholders",
                        {{"template", command_template}});
        }
    } else if (builtin != kBuiltinPassthrough && builtin != kBuiltinToyJson &&
               builtin != kBuiltinToyBinary) {
        throw Error(ErrorCode::InvalidPlugin, "unknown builtin converter '" + builtin + "'");
    }
}

void PluginRegistry::register_plugin(ConverterPlugin plugin) {
    plugin.validate();
    std::lock_guard lock(mu_);
    auto key = std::make_pair(plugin.source_framework, plugin.target_format);
    if (plugins_.count(key) != 0) {
        throw Error(ErrorCode::DuplicatePlugin,
                    "a plugin for " + key.first + " -> " + key.second + " is already registered");
    }
    plugins_.emplace(std::move(key), std::move(plugin));
}

std::optional<ConverterPlugin> PluginRegistry::find(const std::string& source,
                                                    const std::string& target) const {
    std::lock_guard lock(mu_);
    const auto it = plugins_.find({source, target});
    if (it == plugins_.end()) return std::nullopt;
    return it->second;
}

std::vector<ConverterPlugin> PluginRegistry::for_source(const std::string& source) const {
    std::lock_guard lock(mu_);
    std::vector<ConverterPlugin> out;
    for (const auto& [key, plugin] : plugins_) {
        if (key.first == source) out.push_back(plugin);
    }
    return out;
}

std::vector<ConverterPlugin> PluginRegistry::all() const {
    std::lock_guard lock(mu_);
    std::vector<ConverterPlugin> out;
    for (const auto& [_, plugin] : plugins_) out.push_back(plugin);
    return out;
}

std::vector<ConverterPlugin> default_plugins() {
    ConverterPlugin json_plugin;
    json_plugin.source_framework = "toy";
    json_plugin.target_format = std::string(kToyJson);
    json_plugin.builtin = std::string(kBuiltinPassthrough);
    json_plugin.produces_backends = {"mockserve"};

    ConverterPlugin binary_plugin;
    binary_plugin.source_framework = "toy";
    binary_plugin.target_format = std::string(kToyBinary);
    binary_plugin.builtin = std::string(kBuiltinToyBinary);
    binary_plugin.produces_backends = {"mockserve"};
    return {json_plugin, binary_plugin};
}

std::string run_builtin(const std::string& name, std::string_view input) {
    if (name == kBuiltinPassthrough) return std::string(input);
    if (name == kBuiltinToyJson) return encode_toy_json(decode_toy_any(input));
    if (name == kBuiltinToyBinary) return encode_toy_binary(decode_toy_any(input));
    throw Error(ErrorCode::InvalidPlugin, "unknown builtin converter '" + name + "'");
}

Converter::Converter(registry::Registry& registry, std::shared_ptr<PluginRegistry> plugins,
                     ConverterOptions options)
    : registry_(registry), plugins_(std::move(plugins)), options_(std::move(options)) {}

ConversionPlan Converter::plan(const ModelRecord& record,
                               const std::vector<std::string>& targets) const {
    ConversionPlan plan;
    plan.record_id = record.id;
    if (targets.empty()) {
        for (auto& plugin : plugins_->for_source(record.framework)) {
            auto target = plugin.target_format;
            plan.steps.push_back({std::move(plugin), std::move(target)});
        }
        return plan;
    }
    for (const auto& target : targets) {
        auto plugin = plugins_->find(record.framework, target);
        if (!plugin) {
            throw Error(ErrorCode::UnsupportedConversion,
                        "no converter from " + record.framework + " to " + target,
                        {{"source", record.framework}, {"target", target}});
        }
        plan.steps.push_back({std::move(*plugin), target});
    }
    return plan;
}

std::shared_ptr<std::mutex> Converter::record_lock(const std::string& record_id) {
    std::lock_guard lock(locks_mu_);
    auto& slot = record_locks_[record_id];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

bool Converter::begin(const std::string& record_id) {
    // Records already past conversion only gain variants.
    return registry_.try_transition(record_id, ModelStatus::Converting);
}

std::string Converter::run_external(const ConverterPlugin& plugin, std::string_view input) {
    const fs::path dir = util::make_temp_dir(options_.work_dir, "job-");
    struct Cleanup {
        fs::path dir;
        ~Cleanup() {
            std::error_code ec;
            fs::remove_all(dir, ec);
        }
    } cleanup{dir};

    const fs::path in_path = dir / "input";
    const fs::path out_path = dir / "output";
    const fs::path log_path = dir / "plugin.log";
    util::write_file_atomic(in_path, input);
    ::chmod(in_path.c_str(), 0444);

    std::string command = replace_all(plugin.command_template, "{input}", shell_quote(in_path.string()));
    command = replace_all(command, "{output}", shell_quote(out_path.string()));

    util::SpawnOptions spawn;
    spawn.argv = {"/bin/sh", "-c", command};
    spawn.cwd = dir;
    spawn.stdout_path = log_path;
    spawn.stderr_path = log_path;
    const auto result = util::run_command(spawn, options_.timeout);
    if (result.timed_out) {
        throw Error(ErrorCode::Timeout,
                    "converter " + plugin.source_framework + " -> " + plugin.target_format +
                        " timed out after " + std::to_string(options_.timeout.count()) + " ms");
    }
    if (result.exit_status != 0) {
        throw Error(ErrorCode::PluginFailure,
                    "converter " + plugin.source_framework + " -> " + plugin.target_format +
                        " exited with status " + std::to_string(result.exit_status),
                    {{"log", log_tail(log_path)}});
    }
    std::error_code ec;
    if (!fs::is_regular_file(out_path, ec) || fs::file_size(out_path, ec) == 0) {
        throw Error(ErrorCode::PluginFailure, "converter " + plugin.source_framework + " -> " +
                                                  plugin.target_format + " produced no output");
    }
    return util::read_file(out_path);
}

ModelVariant Converter::execute(const ModelRecord& record, const ConversionStep& step) {
    const std::string source = registry_.get_blob(record.weight_digest);
    std::string output;
    if (step.plugin.kind == PluginKind::Builtin) {
        try {
            output = run_builtin(step.plugin.builtin, source);
        } catch (const Error& e) {
            throw Error(ErrorCode::PluginFailure, e.what());
        }
    } else {
        output = run_external(step.plugin, source);
    }
    if (step.target_format == kToyJson || step.target_format == kToyBinary) {
        try {
            step.target_format == kToyJson ? decode_toy_json(output) : decode_toy_binary(output);
        } catch (const Error& e) {
            throw Error(ErrorCode::PluginFailure,
                        std::string("converter produced a malformed model: ") + e.what());
        }
    }
    ModelVariant variant;
    variant.id = util::new_id();
    variant.parent_id = record.id;
    variant.format = step.target_format;
    variant.blob_digest = registry_.put_blob(output);
    variant.serving_backends = step.plugin.produces_backends;
    variant.created_at = util::now();
    registry_.add_variant(record.id, variant);
    return variant;
}

ModelVariant Converter::convert(const std::string& record_id, const std::string& target_format) {
    ConversionPlan p = plan(registry_.get(record_id), {target_format});
    auto outcome = run_plan(p);
    if (outcome.variants.empty()) {
        const auto& failure = outcome.failures.front();
        throw Error(failure.code, failure.message, {{"target", target_format}});
    }
    return outcome.variants.front();
}

ConversionOutcome Converter::run_plan(const ConversionPlan& plan) {
    auto lock_ptr = record_lock(plan.record_id);
    std::lock_guard lock(*lock_ptr);

    const bool owns_status = begin(plan.record_id);
    ConversionOutcome outcome;
    for (const auto& step : plan.steps) {
        try {
            outcome.variants.push_back(execute(registry_.get(plan.record_id), step));
        } catch (const Error& e) {
            outcome.failures.push_back({step.target_format, e.code(), e.what()});
        }
    }
    if (owns_status) {
        registry_.try_transition(plan.record_id, outcome.variants.empty() && !plan.steps.empty()
                                                     ? ModelStatus::Failed
                                                     : ModelStatus::Converted);
    }
    return outcome;
}

}  // namespace modelci::converter
