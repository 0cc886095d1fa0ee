// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/mockserve/latency_model.hpp"

#include <algorithm>
#include <sstream>

#include "modelci/error.hpp"

namespace modelci::mockserve {

void LatencyModel::validate() const {
    if (base_ms < 0 || per_sample_ms < 0 || jitter_ms < 0) {
        throw Error(ErrorCode::InvalidArgument, "latency model parameters must be >= 0");
    }
}

ServiceTimer::ServiceTimer(LatencyModel model, std::uint64_t seed) : model_(model), rng_(seed) {
    model_.validate();
}

double ServiceTimer::service_time_ms(int batch_size) {
    double t = model_.base_ms + model_.per_sample_ms * batch_size;
    if (model_.jitter_ms > 0) {
        std::uniform_real_distribution<double> jitter(0.0, model_.jitter_ms);
        std::lock_guard lock(mu_);
        t += jitter(rng_);
    }
    return t;
}

FaultScript FaultScript::parse(const std::string& text) {
    FaultScript script;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        Event e;
        if (!(fields >> e.at_ms >> e.action) || e.at_ms < 0 ||
            (e.action != "health-fail" && e.action != "health-ok" && e.action != "predict-fail" &&
             e.action != "predict-ok")) {
            throw Error(ErrorCode::InvalidArgument,
                        "fault script line " + std::to_string(lineno) + ": '" + line + "'");
        }
        script.events_.push_back(std::move(e));
    }
    std::stable_sort(script.events_.begin(), script.events_.end(),
                     [](const Event& a, const Event& b) { return a.at_ms < b.at_ms; });
    return script;
}

FaultScript::State FaultScript::state_at(std::int64_t elapsed_ms) const {
    State s;
    for (const auto& e : events_) {
        if (e.at_ms > elapsed_ms) break;
        if (e.action == "health-fail") s.health_ok = false;
        if (e.action == "health-ok") s.health_ok = true;
        if (e.action == "predict-fail") s.predict_ok = false;
        if (e.action == "predict-ok") s.predict_ok = true;
    }
    return s;
}

}  // namespace modelci::mockserve
