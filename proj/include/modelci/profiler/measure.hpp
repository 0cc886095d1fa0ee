// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>

#include "modelci/profiler/stats.hpp"
#include "modelci/protocol.hpp"

namespace modelci::profiler {

struct MeasureOptions {
    int batch_size = 1;
    int input_dim = 1;
    int requests = 100;
    int warmup_requests = 10;
    int concurrency = 1;
    std::chrono::milliseconds connect_timeout{1000};
    std::chrono::milliseconds request_timeout{30000};
    // The cell aborts once failed requests exceed this share of `requests`.
    double max_failure_fraction = 0.05;
};

// Drives `concurrency` closed-loop clients, each on its own connection,
// until exactly `requests` requests have succeeded. Failed requests do not
// count. Latencies and completion instants use the monotonic clock;
// completions are relative to the end of the warmup.
// Throws Error(RequestFailure) when too many requests fail.
LatencySamples measure_cell(const Endpoint& endpoint, Protocol protocol, const MeasureOptions& options);

}  // namespace modelci::profiler
