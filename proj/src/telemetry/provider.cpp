// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/telemetry/provider.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "modelci/error.hpp"
#include "modelci/util/fs.hpp"

namespace modelci::telemetry {

namespace {

std::string read_proc(const std::filesystem::path& path) {
    // /proc files report size 0, so read them as streams.
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ProviderFailure, "cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

HostProvider::HostProvider(std::filesystem::path proc_root) : root_(std::move(proc_root)) {}

HostProvider::CpuTimes HostProvider::read_cpu() const {
    std::istringstream in(read_proc(root_ / "stat"));
    std::string label;
    in >> label;
    if (label != "cpu") throw Error(ErrorCode::ProviderFailure, "unexpected /proc/stat layout");
    // user nice system idle iowait irq softirq steal [guest guest_nice]
    std::uint64_t v[8] = {};
    for (auto& x : v) {
        if (!(in >> x)) throw Error(ErrorCode::ProviderFailure, "short /proc/stat cpu line");
    }
    CpuTimes t;
    for (auto x : v) t.total += x;
    t.busy = t.total - v[3] - v[4];
    return t;
}

std::map<std::string, DeviceStats> HostProvider::sample() {
    std::lock_guard lock(mu_);
    if (!last_) {
        last_ = read_cpu();
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    const CpuTimes cur = read_cpu();
    const std::uint64_t dt = cur.total - std::min(cur.total, last_->total);
    const std::uint64_t db = cur.busy - std::min(cur.busy, last_->busy);
    last_ = cur;

    DeviceStats stats;
    stats.utilization = dt == 0 ? 0.0 : std::clamp(static_cast<double>(db) / static_cast<double>(dt), 0.0, 1.0);

    std::istringstream mem(read_proc(root_ / "meminfo"));
    std::string key, unit;
    std::uint64_t value = 0;
    std::optional<std::uint64_t> total, available;
    while (mem >> key >> value) {
        std::getline(mem, unit);
        if (key == "MemTotal:") total = value * 1024;
        if (key == "MemAvailable:") available = value * 1024;
    }
    if (!total || !available) throw Error(ErrorCode::ProviderFailure, "incomplete /proc/meminfo");
    stats.memory_total = *total;
    stats.memory_used = *total - std::min(*total, *available);
    return {{"cpu:0", stats}};
}

std::vector<SyntheticProvider::Group> SyntheticProvider::parse_trace(const std::string& text) {
    std::map<std::int64_t, Group> groups;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        std::int64_t t = 0;
        std::string device;
        DeviceStats s;
        std::string extra;
        const bool ok = static_cast<bool>(fields >> t >> device >> s.utilization >> s.memory_used >> s.memory_total) &&
                        !(fields >> extra) && t >= 0 && s.utilization >= 0 && s.utilization <= 1 &&
                        s.memory_used <= s.memory_total;
        if (!ok) {
            throw Error(ErrorCode::InvalidArgument, "trace line " + std::to_string(lineno) + ": '" + line + "'");
        }
        auto& g = groups[t];
        g.t_ms = t;
        g.devices[device] = s;
    }
    if (groups.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no samples");
    std::vector<Group> out;
    for (auto& [t, g] : groups) out.push_back(std::move(g));
    return out;
}

SyntheticProvider::SyntheticProvider(std::vector<Group> trace, Mode mode) : trace_(std::move(trace)), mode_(mode) {
    if (trace_.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no samples");
}

SyntheticProvider SyntheticProvider::from_file(const std::filesystem::path& path, Mode mode) {
    return SyntheticProvider(parse_trace(util::read_file(path)), mode);
}

void SyntheticProvider::set_failing(bool failing) {
    std::lock_guard lock(mu_);
    failing_ = failing;
}

std::map<std::string, DeviceStats> SyntheticProvider::sample() {
    std::lock_guard lock(mu_);
    if (failing_) throw Error(ErrorCode::ProviderFailure, "synthetic provider set to fail");
    if (mode_ == Mode::Step) {
        const std::size_t i = std::min(next_, trace_.size() - 1);
        if (next_ < trace_.size()) ++next_;
        return trace_[i].devices;
    }
    const auto now = std::chrono::steady_clock::now();
    if (!started_) started_ = now;
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(now - *started_).count() + trace_.front().t_ms;
    // Last group whose timestamp has been reached.
    auto it = std::upper_bound(trace_.begin(), trace_.end(), elapsed,
                               [](std::int64_t t, const Group& g) { return t < g.t_ms; });
    return (it == trace_.begin() ? trace_.front() : *std::prev(it)).devices;
}

ProcessStatsReader::ProcessStatsReader(std::filesystem::path proc_root) : root_(std::move(proc_root)) {}

std::optional<ProcessStatsReader::Raw> ProcessStatsReader::read(int pid) const {
    const auto dir = root_ / std::to_string(pid);
    std::ifstream stat_file(dir / "stat");
    std::string stat;
    if (!stat_file || !std::getline(stat_file, stat)) return std::nullopt;
    // The command name may contain spaces; fields resume after the last ')'.
    const auto close = stat.rfind(')');
    if (close == std::string::npos) return std::nullopt;
    std::istringstream fields(stat.substr(close + 2));
    std::vector<std::string> f;
    for (std::string x; fields >> x;) f.push_back(x);
    // f[0] is field 3 (state); utime=14, stime=15, starttime=22.
    if (f.size() < 20 || f[0] == "Z" || f[0] == "X") return std::nullopt;
    Raw raw;
    try {
        raw.cpu_ticks = std::stoull(f[11]) + std::stoull(f[12]);
        raw.start_ticks = std::stoull(f[19]);
    } catch (const std::exception&) {
        return std::nullopt;
    }

    std::ifstream status(dir / "status");
    for (std::string line; std::getline(status, line);) {
        if (line.rfind("VmRSS:", 0) == 0) {
            raw.rss_bytes = std::stoull(line.substr(6)) * 1024;
            break;
        }
    }

    std::ifstream net(dir / "net" / "dev");
    std::string line;
    for (int skip = 0; skip < 2 && std::getline(net, line); ++skip) {
    }
    while (std::getline(net, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::istringstream cols(line.substr(colon + 1));
        std::uint64_t c[9] = {};
        for (auto& x : c) cols >> x;
        raw.rx_bytes += c[0];
        raw.tx_bytes += c[8];
    }
    return raw;
}

double ProcessStatsReader::uptime_seconds() const {
    std::ifstream in(root_ / "uptime");
    double up = 0;
    in >> up;
    return up;
}

}  // namespace modelci::telemetry
