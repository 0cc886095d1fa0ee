// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "modelci/telemetry/types.hpp"

namespace modelci::telemetry {

// Source of device statistics. sample() throws Error(ProviderFailure).
class DeviceProvider {
public:
    virtual ~DeviceProvider() = default;
    virtual std::map<std::string, DeviceStats> sample() = 0;
    virtual std::string name() const = 0;
};

// The host CPU as device "cpu:0": utilization from /proc/stat deltas,
// memory from /proc/meminfo (used = total - available).
class HostProvider final : public DeviceProvider {
public:
    explicit HostProvider(std::filesystem::path proc_root = "/proc");
    std::map<std::string, DeviceStats> sample() override;
    std::string name() const override { return "host"; }

private:
    struct CpuTimes {
        std::uint64_t busy = 0;
        std::uint64_t total = 0;
    };
    CpuTimes read_cpu() const;

    std::filesystem::path root_;
    std::mutex mu_;
    std::optional<CpuTimes> last_;
};

// Replays a trace of `<t_ms> <device> <util> <mem_used> <mem_total>` lines.
// Lines sharing a t_ms form one sample. After the last sample the final
// values are held.
class SyntheticProvider final : public DeviceProvider {
public:
    enum class Mode {
        Step,      // each sample() advances one group
        Realtime,  // group chosen by elapsed time since the first sample()
    };

    struct Group {
        std::int64_t t_ms = 0;
        std::map<std::string, DeviceStats> devices;
    };

    // Throws Error(EmptyTrace) on a trace without samples and
    // Error(InvalidArgument) on malformed lines.
    static std::vector<Group> parse_trace(const std::string& text);

    SyntheticProvider(std::vector<Group> trace, Mode mode);
    static SyntheticProvider from_file(const std::filesystem::path& path, Mode mode);

    std::map<std::string, DeviceStats> sample() override;
    std::string name() const override { return "synthetic"; }

    // Test hook: every subsequent sample() throws ProviderFailure while set.
    void set_failing(bool failing);

private:
    std::vector<Group> trace_;
    Mode mode_;
    std::mutex mu_;
    std::size_t next_ = 0;
    std::optional<std::chrono::steady_clock::time_point> started_;
    bool failing_ = false;
};

// Per-process statistics read from /proc/<pid>. Network counters come from
// the process's network namespace, so processes sharing a namespace report
// the same interface totals.
class ProcessStatsReader {
public:
    explicit ProcessStatsReader(std::filesystem::path proc_root = "/proc");

    struct Raw {
        std::uint64_t cpu_ticks = 0;  // utime + stime
        std::uint64_t start_ticks = 0;
        std::uint64_t rss_bytes = 0;
        std::uint64_t rx_bytes = 0;
        std::uint64_t tx_bytes = 0;
    };

    // nullopt when the process does not exist or is a zombie.
    std::optional<Raw> read(int pid) const;
    double uptime_seconds() const;

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

}  // namespace modelci::telemetry
