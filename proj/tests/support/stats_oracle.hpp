// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

// Brute-force reimplementations of the profiler statistics. They share no
// code with src/profiler and favour obviousness over speed.

#include <cstdint>
#include <vector>

namespace modelci::testing {

// Nearest rank by counting: the smallest sample v such that at least
// permille/1000 of the samples are <= v. `permille` = p * 10, so p = 95.5%
// is 955. Exact integer arithmetic throughout.
inline double oracle_percentile(const std::vector<double>& samples, int permille) {
    const std::int64_t n = static_cast<std::int64_t>(samples.size());
    double best = 0;
    bool found = false;
    for (const double candidate : samples) {
        std::int64_t at_or_below = 0;
        for (const double s : samples) at_or_below += s <= candidate ? 1 : 0;
        if (at_or_below * 1000 >= permille * n && (!found || candidate < best)) {
            best = candidate;
            found = true;
        }
    }
    return best;
}

struct RateFraction {
    std::int64_t completions = 0;
    std::int64_t span_us = 1;
};

// Peak throughput by enumerating every integer-microsecond window end over
// [start, last] (windows (e - w, e]) plus the overall average, comparing
// rates as exact fractions. Only for small time ranges.
inline double oracle_peak_throughput(const std::vector<std::int64_t>& completions_us, int batch,
                                     std::int64_t window_us, std::int64_t start_us,
                                     std::int64_t grid_step_us = 1) {
    std::int64_t last = start_us;
    for (const auto t : completions_us) last = t > last ? t : last;
    const std::int64_t n = static_cast<std::int64_t>(completions_us.size());
    const std::int64_t duration = last - start_us > 0 ? last - start_us : 1;
    RateFraction best{n, duration};
    if (duration >= window_us) {
        for (std::int64_t end = start_us; end <= last; end += grid_step_us) {
            std::int64_t count = 0;
            for (const auto t : completions_us) count += (t > end - window_us && t <= end) ? 1 : 0;
            if (static_cast<__int128>(count) * best.span_us >
                static_cast<__int128>(best.completions) * window_us) {
                best = {count, window_us};
            }
        }
    }
    return static_cast<double>(best.completions * batch) * 1e6 / static_cast<double>(best.span_us);
}

// Same rule but only trying window ends at completion instants, O(n^2).
inline double oracle_peak_throughput_at_completions(const std::vector<std::int64_t>& completions_us,
                                                    int batch, std::int64_t window_us,
                                                    std::int64_t start_us) {
    std::int64_t last = start_us;
    for (const auto t : completions_us) last = t > last ? t : last;
    const std::int64_t n = static_cast<std::int64_t>(completions_us.size());
    const std::int64_t duration = last - start_us > 0 ? last - start_us : 1;
    RateFraction best{n, duration};
    if (duration >= window_us) {
        for (const auto end : completions_us) {
            std::int64_t count = 0;
            for (const auto t : completions_us) count += (t > end - window_us && t <= end) ? 1 : 0;
            if (static_cast<__int128>(count) * best.span_us >
                static_cast<__int128>(best.completions) * window_us) {
                best = {count, window_us};
            }
        }
    }
    return static_cast<double>(best.completions * batch) * 1e6 / static_cast<double>(best.span_us);
}

}  // namespace modelci::testing
