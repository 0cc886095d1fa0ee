// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace modelci::mockserve {

// Service time for a batch of b samples:
//   base_ms + per_sample_ms * b + U(0, jitter_ms)
struct LatencyModel {
    double base_ms = 0;
    double per_sample_ms = 0;
    double jitter_ms = 0;

    void validate() const;
};

// Evaluates a LatencyModel with a seeded generator; the same seed replays
// the same sequence of service times. Thread-safe.
class ServiceTimer {
public:
    ServiceTimer(LatencyModel model, std::uint64_t seed);

    double service_time_ms(int batch_size);
    const LatencyModel& model() const noexcept { return model_; }

private:
    LatencyModel model_;
    std::mutex mu_;
    std::mt19937_64 rng_;
};

// Scripted faults, one per line: `<t_ms> <action>` with t relative to
// server start. Actions: health-fail, health-ok, predict-fail, predict-ok.
// Blank lines and lines starting with '#' are ignored.
class FaultScript {
public:
    struct State {
        bool health_ok = true;
        bool predict_ok = true;
    };

    FaultScript() = default;
    static FaultScript parse(const std::string& text);

    State state_at(std::int64_t elapsed_ms) const;
    bool empty() const noexcept { return events_.empty(); }

private:
    struct Event {
        std::int64_t at_ms;
        std::string action;
    };
    std::vector<Event> events_;
};

}  // namespace modelci::mockserve
