// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/util/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <thread>

#include "modelci/error.hpp"

extern char** environ;

namespace modelci::util {

namespace {

using Clock = std::chrono::steady_clock;

int decode_status(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

[[noreturn]] void child_fail(int report_fd) {
    const int err = errno;
    [[maybe_unused]] auto n = ::write(report_fd, &err, sizeof err);
    ::_exit(127);
}

// PR_SET_PDEATHSIG fires when the forking *thread* exits, not the process.
// Children that should die with the daemon are therefore forked from one
// thread that lives as long as the process. It is leaked on purpose so
// static destruction never races with it.
class Launcher {
public:
    static Launcher& instance() {
        static Launcher* launcher = new Launcher();
        return *launcher;
    }

    Subprocess run(std::function<Subprocess()> fn) {
        std::packaged_task<Subprocess()> task(std::move(fn));
        auto result = task.get_future();
        {
            std::lock_guard lock(mu_);
            queue_.push_back(std::move(task));
        }
        cv_.notify_one();
        return result.get();
    }

private:
    Launcher() {
        std::thread([this] {
            for (;;) {
                std::packaged_task<Subprocess()> task;
                {
                    std::unique_lock lock(mu_);
                    cv_.wait(lock, [&] { return !queue_.empty(); });
                    task = std::move(queue_.front());
                    queue_.pop_front();
                }
                task();
            }
        }).detach();
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::packaged_task<Subprocess()>> queue_;
};

}  // namespace

Subprocess Subprocess::spawn(const SpawnOptions& options) {
    if (!options.die_with_parent) return spawn_here(options);
    return Launcher::instance().run([&options] { return spawn_here(options); });
}

Subprocess Subprocess::spawn_here(const SpawnOptions& options) {
    if (options.argv.empty()) {
        throw Error(ErrorCode::LaunchFailure, "empty command line");
    }

    // Everything the child touches is prepared before fork; after fork only
    // async-signal-safe calls are made.
    std::vector<char*> argv;
    for (const auto& a : options.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    std::vector<std::string> env_store;
    for (char** e = environ; *e != nullptr; ++e) {
        std::string_view entry(*e);
        const auto eq = entry.find('=');
        if (eq != std::string_view::npos &&
            options.extra_env.count(std::string(entry.substr(0, eq))) != 0) {
            continue;
        }
        env_store.emplace_back(entry);
    }
    for (const auto& [k, v] : options.extra_env) env_store.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& e : env_store) envp.push_back(e.data());
    envp.push_back(nullptr);

    const std::string out_path = options.stdout_path.empty() ? "/dev/null" : options.stdout_path.string();
    const std::string err_path = options.stderr_path.empty() ? "/dev/null" : options.stderr_path.string();
    const std::string cwd = options.cwd.string();

    int out_pipe[2] = {-1, -1};
    if (options.capture_stdout && ::pipe2(out_pipe, O_CLOEXEC) != 0) {
        throw Error(ErrorCode::LaunchFailure, std::string("pipe: ") + std::strerror(errno));
    }
    int report[2];
    if (::pipe2(report, O_CLOEXEC) != 0) {
        if (out_pipe[0] >= 0) {
            ::close(out_pipe[0]);
            ::close(out_pipe[1]);
        }
        throw Error(ErrorCode::LaunchFailure, std::string("pipe: ") + std::strerror(errno));
    }

    const pid_t parent = ::getpid();
    const pid_t pid = ::fork();
    if (pid < 0) {
        throw Error(ErrorCode::LaunchFailure, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::close(report[0]);
        if (options.new_process_group) ::setpgid(0, 0);
        if (options.die_with_parent) {
            ::prctl(PR_SET_PDEATHSIG, SIGTERM);
            if (::getppid() != parent) ::_exit(127);
        }
        ::signal(SIGPIPE, SIG_DFL);
        const int in = ::open("/dev/null", O_RDONLY);
        if (in < 0 || ::dup2(in, 0) < 0) child_fail(report[1]);
        if (options.capture_stdout) {
            if (::dup2(out_pipe[1], 1) < 0) child_fail(report[1]);
        } else {
            const int fd = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
            if (fd < 0 || ::dup2(fd, 1) < 0) child_fail(report[1]);
        }
        const int efd = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
        if (efd < 0 || ::dup2(efd, 2) < 0) child_fail(report[1]);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) child_fail(report[1]);
        ::execve(argv[0], argv.data(), envp.data());
        if (std::strchr(argv[0], '/') == nullptr) {
            ::execvpe(argv[0], argv.data(), envp.data());
        }
        child_fail(report[1]);
    }

    ::close(report[1]);
    if (options.capture_stdout) ::close(out_pipe[1]);

    Subprocess proc;
    proc.pid_ = pid;
    proc.group_ = options.new_process_group;
    proc.stdout_fd_ = options.capture_stdout ? out_pipe[0] : -1;
    if (options.new_process_group) ::setpgid(pid, pid);

    int child_errno = 0;
    ssize_t n;
    do {
        n = ::read(report[0], &child_errno, sizeof child_errno);
    } while (n < 0 && errno == EINTR);
    ::close(report[0]);
    if (n > 0) {
        proc.wait_for(std::chrono::milliseconds(1000));
        throw Error(ErrorCode::LaunchFailure,
                    "cannot execute " + options.argv[0] + ": " + std::strerror(child_errno));
    }
    return proc;
}

Subprocess::Subprocess(Subprocess&& other) noexcept { *this = std::move(other); }

Subprocess& Subprocess::operator=(Subprocess&& other) noexcept {
    if (this != &other) {
        if (valid()) stop();
        close_stdout();
        pid_ = std::exchange(other.pid_, -1);
        stdout_fd_ = std::exchange(other.stdout_fd_, -1);
        stdout_eof_ = other.stdout_eof_;
        group_ = other.group_;
        exit_status_ = std::exchange(other.exit_status_, std::nullopt);
        buffer_ = std::move(other.buffer_);
    }
    return *this;
}

Subprocess::~Subprocess() {
    if (valid()) stop();
    close_stdout();
}

std::optional<std::string> Subprocess::read_line(std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    while (true) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (stdout_fd_ < 0 || stdout_eof_) return std::nullopt;
        const auto left =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) return std::nullopt;
        pollfd pfd{stdout_fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) return std::nullopt;
        char buf[4096];
        const ssize_t n = ::read(stdout_fd_, buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            stdout_eof_ = true;
            continue;
        }
        buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

void Subprocess::close_stdout() noexcept {
    if (stdout_fd_ >= 0) {
        ::close(stdout_fd_);
        stdout_fd_ = -1;
    }
}

bool Subprocess::alive() {
    if (!valid() || exit_status_) return false;
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
        exit_status_ = decode_status(status);
        return false;
    }
    return r == 0;
}

std::optional<int> Subprocess::wait_for(std::chrono::milliseconds timeout) {
    if (!valid()) return exit_status_;
    const auto deadline = Clock::now() + timeout;
    auto pause = std::chrono::milliseconds(1);
    while (alive()) {
        if (Clock::now() >= deadline) return std::nullopt;
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::milliseconds(20));
    }
    return exit_status_;
}

void Subprocess::signal_group(int sig) noexcept {
    if (!valid()) return;
    if (group_) {
        ::kill(-pid_, sig);
    }
    ::kill(pid_, sig);
}

void Subprocess::stop(std::chrono::milliseconds grace) {
    if (!valid()) return;
    if (alive()) {
        signal_group(SIGTERM);
        if (!wait_for(grace)) {
            signal_group(SIGKILL);
            int status = 0;
            if (::waitpid(pid_, &status, 0) == pid_) exit_status_ = decode_status(status);
        }
    } else if (group_) {
        // Leader is gone; sweep up anything it left in the group.
        ::kill(-pid_, SIGKILL);
    }
    close_stdout();
    pid_ = -1;
}

CommandResult run_command(const SpawnOptions& options, std::chrono::milliseconds timeout) {
    Subprocess proc = Subprocess::spawn(options);
    CommandResult result;
    if (auto status = proc.wait_for(timeout)) {
        result.exit_status = *status;
    } else {
        result.timed_out = true;
        proc.stop(std::chrono::milliseconds(500));
    }
    return result;
}

}  // namespace modelci::util
