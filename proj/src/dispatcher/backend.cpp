// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/dispatcher/backend.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "modelci/error.hpp"
#include "modelci/util/fs.hpp"

namespace modelci::dispatcher {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

void ServingBackendTemplate::validate() const {
    if (name.empty()) throw Error(ErrorCode::InvalidArgument, "backend name is empty");
    if (accepted_formats.empty()) {
        throw Error(ErrorCode::InvalidArgument, "backend " + name + " accepts no formats");
    }
    if (protocols.empty()) throw Error(ErrorCode::InvalidArgument, "backend " + name + " declares no protocols");
    if (launch.command.empty() && launch.kind == LaunchTemplate::Kind::Process) {
        throw Error(ErrorCode::InvalidArgument, "backend " + name + " has no launch command");
    }
    if (launch.kind == LaunchTemplate::Kind::Container && launch.image.empty()) {
        throw Error(ErrorCode::InvalidArgument, "container backend " + name + " has no image");
    }
    // Unknown placeholders are almost certainly typos.
    static const std::vector<std::string> known = {"{model}", "{port}", "{protocol}", "{device}", "{mockserve}"};
    for (const auto& arg : launch.command) {
        for (std::size_t open = arg.find('{'); open != std::string::npos; open = arg.find('{', open + 1)) {
            const auto close = arg.find('}', open);
            const std::string token = close == std::string::npos ? arg.substr(open) : arg.substr(open, close - open + 1);
            if (std::find(known.begin(), known.end(), token) == known.end()) {
                throw Error(ErrorCode::InvalidArgument, "backend " + name + ": unknown placeholder " + token);
            }
        }
    }
}

bool ServingBackendTemplate::accepts(const std::string& format) const {
    return std::find(accepted_formats.begin(), accepted_formats.end(), format) != accepted_formats.end();
}

bool ServingBackendTemplate::supports(Protocol protocol) const {
    return std::find(protocols.begin(), protocols.end(), protocol) != protocols.end();
}

ServingBackendTemplate parse_backend_template(const json& j) {
    ServingBackendTemplate t;
    try {
        t.name = j.at("name").get<std::string>();
        t.accepted_formats = j.at("accepted_formats").get<std::vector<std::string>>();
        for (const auto& p : j.at("protocols")) t.protocols.push_back(parse_protocol(p.get<std::string>()));
        const auto& launch = j.at("launch");
        const std::string kind = launch.value("kind", "process");
        if (kind == "process") t.launch.kind = LaunchTemplate::Kind::Process;
        else if (kind == "container") t.launch.kind = LaunchTemplate::Kind::Container;
        else throw Error(ErrorCode::InvalidArgument, "unknown launch kind '" + kind + "'");
        t.launch.command = launch.value("command", std::vector<std::string>{});
        t.launch.image = launch.value("image", "");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("backend template: ") + e.what());
    }
    t.validate();
    return t;
}

void to_json(json& j, const ServingBackendTemplate& t) {
    json protocols = json::array();
    for (auto p : t.protocols) protocols.push_back(to_string(p));
    json launch = {{"kind", t.launch.kind == LaunchTemplate::Kind::Process ? "process" : "container"},
                   {"command", t.launch.command}};
    if (!t.launch.image.empty()) launch["image"] = t.launch.image;
    j = json{{"name", t.name}, {"accepted_formats", t.accepted_formats}, {"protocols", protocols}, {"launch", launch}};
}

ServingBackendTemplate mockserve_template(std::vector<std::string> extra_args) {
    ServingBackendTemplate t;
    t.name = "mockserve";
    t.accepted_formats = {"toy-json", "toy-binary"};
    t.protocols = {Protocol::Rest, Protocol::GrpcStyle};
    t.launch.command = {"{mockserve}", "--model", "{model}", "--port", "{port}", "--protocol", "{protocol}"};
    t.launch.command.insert(t.launch.command.end(), extra_args.begin(), extra_args.end());
    return t;
}

std::vector<std::string> expand_command(const std::vector<std::string>& command,
                                        const std::map<std::string, std::string>& values) {
    std::vector<std::string> out;
    out.reserve(command.size());
    for (std::string arg : command) {
        for (const auto& [key, value] : values) {
            const std::string token = "{" + key + "}";
            for (auto pos = arg.find(token); pos != std::string::npos; pos = arg.find(token, pos + value.size())) {
                arg.replace(pos, token.size(), value);
            }
        }
        out.push_back(std::move(arg));
    }
    return out;
}

int parse_ready_line(const std::string& line) {
    std::istringstream in(line);
    std::string word;
    long port = 0;
    std::string rest;
    if (!(in >> word >> port) || word != "READY" || (in >> rest) || port <= 0 || port > 65535) return 0;
    return static_cast<int>(port);
}

namespace {

std::string tail(const std::filesystem::path& path, std::size_t max = 400) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return {};
    std::string text = util::read_file(path);
    return text.size() > max ? text.substr(text.size() - max) : text;
}

// Port from the first complete READY line in a log file, or 0.
int scan_ready(const std::filesystem::path& log) {
    std::ifstream in(log);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t start = 0;
    for (auto nl = content.find('\n'); nl != std::string::npos; nl = content.find('\n', start)) {
        if (int port = parse_ready_line(content.substr(start, nl - start))) return port;
        start = nl + 1;
    }
    return 0;
}

}  // namespace

Started LocalProcessBackend::start(const ExecutionSpec& spec, std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    std::filesystem::create_directories(spec.work_dir);
    util::SpawnOptions opts;
    opts.argv = spec.argv;
    opts.cwd = spec.work_dir;
    opts.stdout_path = spec.work_dir / "stdout.log";
    opts.stderr_path = spec.work_dir / "stderr.log";
    auto proc = std::make_shared<util::Subprocess>(util::Subprocess::spawn(opts));

    while (true) {
        if (const int port = scan_ready(opts.stdout_path)) {
            std::lock_guard lock(mu_);
            procs_[spec.instance_id] = proc;
            return {spec.instance_id, port, proc->pid()};
        }
        if (!proc->alive()) {
            const auto status = proc->wait_for(std::chrono::milliseconds(0));
            proc->stop(std::chrono::milliseconds(500));  // sweeps leftovers in the group
            throw Error(ErrorCode::LaunchFailure,
                        "backend exited with status " + std::to_string(status.value_or(-1)) +
                            " before the handshake: " + tail(opts.stderr_path),
                        {{"instance_id", spec.instance_id}});
        }
        if (Clock::now() >= deadline) {
            proc->stop(std::chrono::milliseconds(500));
            throw Error(ErrorCode::ReadyTimeout, "no READY line within " + std::to_string(timeout.count()) + " ms",
                        {{"instance_id", spec.instance_id}});
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

void LocalProcessBackend::stop(const std::string& handle) {
    std::shared_ptr<util::Subprocess> proc;
    {
        std::lock_guard lock(mu_);
        auto it = procs_.find(handle);
        if (it == procs_.end()) return;
        proc = it->second;
        procs_.erase(it);
    }
    proc->stop(std::chrono::milliseconds(2000));
}

bool LocalProcessBackend::alive(const std::string& handle) {
    std::shared_ptr<util::Subprocess> proc;
    {
        std::lock_guard lock(mu_);
        auto it = procs_.find(handle);
        if (it == procs_.end()) return false;
        proc = it->second;
    }
    return proc->alive();
}

ContainerBackend::ContainerBackend(std::string runtime) : runtime_(std::move(runtime)) {}

std::vector<std::string> ContainerBackend::run_argv(const ExecutionSpec& spec) const {
    std::vector<std::string> argv = {runtime_, "run", "-d", "--name", container_name(spec.instance_id),
                                     "--network", "host", "-v",
                                     spec.model_dir.string() + ":" + kModelMount + ":ro"};
    if (spec.device.rfind("gpu:", 0) == 0) {
        argv.push_back("--gpus");
        argv.push_back("device=" + spec.device.substr(4));
    }
    argv.push_back(spec.image);
    argv.insert(argv.end(), spec.argv.begin(), spec.argv.end());
    return argv;
}

std::vector<std::string> ContainerBackend::logs_argv(const std::string& name) const {
    return {runtime_, "logs", "-f", name};
}

std::vector<std::string> ContainerBackend::rm_argv(const std::string& name) const {
    return {runtime_, "rm", "-f", name};
}

std::vector<std::string> ContainerBackend::inspect_argv(const std::string& name, const std::string& format) const {
    return {runtime_, "inspect", "--format", format, name};
}

namespace {

// Runs argv and returns trimmed stdout, or nullopt on nonzero exit.
std::optional<std::string> run_capture(const std::vector<std::string>& argv, const std::filesystem::path& scratch,
                                       std::chrono::milliseconds timeout) {
    util::SpawnOptions opts;
    opts.argv = argv;
    opts.stdout_path = scratch;
    const auto result = util::run_command(opts, timeout);
    if (result.timed_out || result.exit_status != 0) return std::nullopt;
    std::string out = util::read_file(scratch);
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out;
}

}  // namespace

Started ContainerBackend::start(const ExecutionSpec& spec, std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    std::filesystem::create_directories(spec.work_dir);
    const std::string name = container_name(spec.instance_id);
    const auto scratch = spec.work_dir / "runtime.out";
    if (!run_capture(run_argv(spec), scratch, timeout)) {
        run_capture(rm_argv(name), scratch, std::chrono::milliseconds(10000));
        throw Error(ErrorCode::LaunchFailure, runtime_ + " run failed for " + name);
    }

    util::SpawnOptions follow;
    follow.argv = logs_argv(name);
    follow.capture_stdout = true;
    auto logs = util::Subprocess::spawn(follow);
    int port = 0;
    while (port == 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left <= std::chrono::milliseconds(0)) break;
        auto line = logs.read_line(left);
        if (line) port = parse_ready_line(*line);
        else if (logs.stdout_closed()) break;
    }
    logs.stop(std::chrono::milliseconds(200));
    if (port == 0) {
        const bool timed_out = Clock::now() >= deadline;
        run_capture(rm_argv(name), scratch, std::chrono::milliseconds(10000));
        throw Error(timed_out ? ErrorCode::ReadyTimeout : ErrorCode::LaunchFailure,
                    "container " + name + " produced no READY line");
    }
    int pid = -1;
    if (auto out = run_capture(inspect_argv(name, "{{.State.Pid}}"), scratch, std::chrono::milliseconds(5000))) {
        try {
            pid = std::stoi(*out);
        } catch (const std::exception&) {
        }
    }
    return {name, port, pid};
}

void ContainerBackend::stop(const std::string& handle) {
    const auto scratch = std::filesystem::temp_directory_path() / ("modelci-rm-" + handle);
    run_capture(rm_argv(handle), scratch, std::chrono::milliseconds(30000));
    std::error_code ec;
    std::filesystem::remove(scratch, ec);
}

bool ContainerBackend::alive(const std::string& handle) {
    const auto scratch = std::filesystem::temp_directory_path() / ("modelci-inspect-" + handle);
    auto out = run_capture(inspect_argv(handle, "{{.State.Running}}"), scratch, std::chrono::milliseconds(5000));
    std::error_code ec;
    std::filesystem::remove(scratch, ec);
    return out && *out == "true";
}

}  // namespace modelci::dispatcher
