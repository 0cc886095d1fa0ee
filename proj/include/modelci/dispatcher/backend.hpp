// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "modelci/protocol.hpp"
#include "modelci/util/process.hpp"

namespace modelci::dispatcher {

// How a serving backend is launched. Command arguments may contain the
// placeholders {model}, {port}, {protocol}, {device} and {mockserve}.
struct LaunchTemplate {
    enum class Kind { Process, Container };
    Kind kind = Kind::Process;
    std::vector<std::string> command;
    std::string image;  // container only
};

struct ServingBackendTemplate {
    std::string name;
    std::vector<std::string> accepted_formats;
    std::vector<Protocol> protocols;
    LaunchTemplate launch;

    // Throws Error(InvalidArgument).
    void validate() const;
    bool accepts(const std::string& format) const;
    bool supports(Protocol protocol) const;
};

ServingBackendTemplate parse_backend_template(const nlohmann::json& j);
void to_json(nlohmann::json& j, const ServingBackendTemplate& t);

// The bundled synthetic backend.
ServingBackendTemplate mockserve_template(std::vector<std::string> extra_args = {});

// Replaces {key} placeholders in each argument.
std::vector<std::string> expand_command(const std::vector<std::string>& command,
                                        const std::map<std::string, std::string>& values);

// What an execution backend is asked to run.
struct ExecutionSpec {
    std::string instance_id;
    std::vector<std::string> argv;   // already expanded
    std::filesystem::path model_dir;  // host directory holding the model file
    std::filesystem::path work_dir;   // logs go here
    std::string image;
    std::string device;
};

struct Started {
    std::string handle;
    int port = 0;
    int pid = -1;  // host pid used for instance statistics, -1 if unknown
};

// Starts and stops serving processes. start() returns once the launched
// program printed `READY <port>`; it throws LaunchFailure when the program
// exits first and ReadyTimeout when the line does not arrive in time. A
// failed start leaves nothing running.
class ExecutionBackend {
public:
    virtual ~ExecutionBackend() = default;
    virtual Started start(const ExecutionSpec& spec, std::chrono::milliseconds timeout) = 0;
    virtual void stop(const std::string& handle) = 0;
    virtual bool alive(const std::string& handle) = 0;
};

// Runs the command as a local child process in its own process group.
// stdout goes to <work_dir>/stdout.log, which is scanned for the handshake.
class LocalProcessBackend final : public ExecutionBackend {
public:
    Started start(const ExecutionSpec& spec, std::chrono::milliseconds timeout) override;
    void stop(const std::string& handle) override;
    bool alive(const std::string& handle) override;

private:
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<util::Subprocess>> procs_;
};

// Shells out to a docker-compatible runtime CLI.
class ContainerBackend final : public ExecutionBackend {
public:
    explicit ContainerBackend(std::string runtime = "docker");

    Started start(const ExecutionSpec& spec, std::chrono::milliseconds timeout) override;
    void stop(const std::string& handle) override;
    bool alive(const std::string& handle) override;

    static std::string container_name(const std::string& instance_id) { return "modelci-" + instance_id; }
    // Mount point of the model directory inside the container.
    static constexpr const char* kModelMount = "/models";

    std::vector<std::string> run_argv(const ExecutionSpec& spec) const;
    std::vector<std::string> logs_argv(const std::string& name) const;
    std::vector<std::string> rm_argv(const std::string& name) const;
    std::vector<std::string> inspect_argv(const std::string& name, const std::string& format) const;

private:
    std::string runtime_;
};

// Parses a `READY <port>` line; returns 0 if the line is something else.
int parse_ready_line(const std::string& line);

}  // namespace modelci::dispatcher
