// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace modelci::util {

struct SpawnOptions {
    std::vector<std::string> argv;
    std::filesystem::path cwd;
    // When set, the child's stdout is a pipe readable through read_line().
    bool capture_stdout = false;
    // Redirect targets used when not captured; empty means /dev/null.
    std::filesystem::path stdout_path;
    std::filesystem::path stderr_path;
    std::map<std::string, std::string> extra_env;
    // The child leads its own process group so stop() reaches grandchildren.
    bool new_process_group = true;
    // SIGTERM the child if the spawning process dies. Such children are
    // forked from a dedicated long-lived thread.
    bool die_with_parent = true;
};

// A child process owned by value. Destruction stops and reaps it.
class Subprocess {
public:
    // Throws Error(LaunchFailure) when fork/exec fails.
    static Subprocess spawn(const SpawnOptions& options);

    Subprocess() = default;
    Subprocess(Subprocess&& other) noexcept;
    Subprocess& operator=(Subprocess&& other) noexcept;
    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;
    ~Subprocess();

    pid_t pid() const noexcept { return pid_; }
    bool valid() const noexcept { return pid_ > 0; }

    // Next newline-terminated line from captured stdout, without the newline.
    // nullopt on timeout or end of stream (see stdout_closed()).
    std::optional<std::string> read_line(std::chrono::milliseconds timeout);
    bool stdout_closed() const noexcept { return stdout_eof_; }
    void close_stdout() noexcept;

    // Reaps the child if it has exited; true while it is still running.
    bool alive();

    // Exit status (exit code, or 128+signal) once the child has exited.
    std::optional<int> wait_for(std::chrono::milliseconds timeout);

    // SIGTERM, then SIGKILL after `grace`; always reaps.
    void stop(std::chrono::milliseconds grace = std::chrono::milliseconds(2000));

private:
    static Subprocess spawn_here(const SpawnOptions& options);
    void signal_group(int sig) noexcept;

    pid_t pid_ = -1;
    int stdout_fd_ = -1;
    bool stdout_eof_ = false;
    bool group_ = false;
    std::optional<int> exit_status_;
    std::string buffer_;
};

struct CommandResult {
    int exit_status = -1;
    bool timed_out = false;
};

// Runs argv to completion, killing it after `timeout`.
CommandResult run_command(const SpawnOptions& options, std::chrono::milliseconds timeout);

}  // namespace modelci::util
