// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modelci/registry/types.hpp"

namespace modelci::profiler {

// Nearest-rank percentile over ascending `sorted` samples: the element at
// 1-based index ceil(p/100 * n). Requires 0 < p <= 100.
// Throws EmptySamples / InvalidArgument.
double percentile(std::span<const double> sorted, double p);

// Highest delivered rate in samples/s.
//
// `completions_us` are request completion instants on a monotonic clock,
// ascending, measured from the same origin as `start_us` (the start of the
// measurement). The rate is the larger of
//   - the busiest window (t - window, t] ending at a completion, and
//   - the run average completions / (last - start),
// times batch_size. Runs shorter than one window use the average alone.
double peak_throughput(std::span<const std::int64_t> completions_us, int batch_size,
                       std::int64_t window_us = 1'000'000, std::int64_t start_us = 0);

// Per-request measurements of one cell.
struct LatencySamples {
    std::vector<double> latencies_ms;
    std::vector<std::int64_t> completions_us;  // ascending, relative to measurement start
    std::vector<int> client_ids;               // which closed-loop client completed each
    std::int64_t failed_requests = 0;
};

struct ResourceSample {
    std::int64_t t_us = 0;
    std::int64_t memory_bytes = 0;
    double cpu_fraction = 0;
};

struct CellProvenance {
    std::string variant_id;
    std::string device;
    std::string backend;
    std::string protocol;
    int batch_size = 1;
    std::string resource_source;
};

// Reduces one cell to its six indicators. An empty trace yields a degraded
// result with unknown memory/utilization. Throws EmptySamples.
registry::ProfilingResult aggregate(const LatencySamples& samples,
                                    std::span<const ResourceSample> trace,
                                    const CellProvenance& cell);

}  // namespace modelci::profiler
