// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/profiler/stats.hpp"

#include <algorithm>
#include <cmath>

#include "modelci/error.hpp"

namespace modelci::profiler {

double percentile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorCode::EmptySamples, "percentile of an empty sample set");
    if (!(p > 0.0) || p > 100.0) {
        throw Error(ErrorCode::InvalidArgument, "percentile must lie in (0, 100]");
    }
    const auto n = static_cast<double>(sorted.size());
    // p is a short decimal; the epsilon absorbs binary rounding of p*n/100
    // so an exact integer rank is not pushed up by one.
    auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

double peak_throughput(std::span<const std::int64_t> completions_us, int batch_size,
                       std::int64_t window_us, std::int64_t start_us) {
    if (completions_us.empty()) {
        throw Error(ErrorCode::EmptySamples, "throughput needs at least one completion");
    }
    if (batch_size < 1 || window_us < 1) {
        throw Error(ErrorCode::InvalidArgument, "batch size and window must be positive");
    }
    const auto n = static_cast<std::int64_t>(completions_us.size());
    const std::int64_t duration = std::max<std::int64_t>(completions_us.back() - start_us, 1);

    std::int64_t best_count = n;
    std::int64_t best_span = duration;
    if (duration >= window_us) {
        std::size_t lo = 0;
        for (std::size_t hi = 0; hi < completions_us.size(); ++hi) {
            while (completions_us[lo] <= completions_us[hi] - window_us) ++lo;
            const auto count = static_cast<std::int64_t>(hi - lo + 1);
            if (static_cast<__int128>(count) * best_span >
                static_cast<__int128>(best_count) * window_us) {
                best_count = count;
                best_span = window_us;
            }
        }
    }
    return static_cast<double>(best_count * batch_size) * 1e6 / static_cast<double>(best_span);
}

registry::ProfilingResult aggregate(const LatencySamples& samples,
                                    std::span<const ResourceSample> trace,
                                    const CellProvenance& cell) {
    if (samples.latencies_ms.empty() || samples.completions_us.empty()) {
        throw Error(ErrorCode::EmptySamples, "no completed requests to aggregate");
    }
    std::vector<double> sorted = samples.latencies_ms;
    std::sort(sorted.begin(), sorted.end());

    registry::ProfilingResult r;
    r.variant_id = cell.variant_id;
    r.device = cell.device;
    r.backend = cell.backend;
    r.protocol = cell.protocol;
    r.batch_size = cell.batch_size;
    r.p50_latency_ms = percentile(sorted, 50);
    r.p95_latency_ms = percentile(sorted, 95);
    r.p99_latency_ms = percentile(sorted, 99);
    r.peak_throughput = peak_throughput(samples.completions_us, cell.batch_size);
    r.raw_sample_count = static_cast<std::int64_t>(sorted.size());
    r.measured_at = util::now();
    r.resource_source = cell.resource_source;
    if (trace.empty()) {
        r.degraded = true;
    } else {
        std::int64_t peak_memory = 0;
        double util_sum = 0;
        for (const auto& s : trace) {
            peak_memory = std::max(peak_memory, s.memory_bytes);
            util_sum += s.cpu_fraction;
        }
        r.memory_bytes = peak_memory;
        r.utilization = std::clamp(util_sum / static_cast<double>(trace.size()), 0.0, 1.0);
    }
    return r;
}

}  // namespace modelci::profiler
