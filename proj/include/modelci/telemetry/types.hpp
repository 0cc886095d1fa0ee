// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "modelci/util/time.hpp"

namespace modelci::telemetry {

struct DeviceStats {
    double utilization = 0;  // [0, 1]
    std::uint64_t memory_used = 0;
    std::uint64_t memory_total = 0;

    bool operator==(const DeviceStats&) const = default;
};

struct DeviceSnapshot {
    util::Timestamp timestamp{};
    std::map<std::string, DeviceStats> devices;
    // Set when the provider failed and this is the previous sample re-served.
    bool stale = false;
    // Increments with every successful provider sample.
    std::uint64_t sequence = 0;
};

struct InstanceStats {
    std::string instance_id;
    util::Timestamp timestamp{};
    double cpu_fraction = 0;  // share of all host CPUs
    std::uint64_t memory_bytes = 0;
    std::uint64_t net_rx_bytes = 0;
    std::uint64_t net_tx_bytes = 0;
};

void to_json(nlohmann::json& j, const DeviceStats& s);
void to_json(nlohmann::json& j, const DeviceSnapshot& s);
void to_json(nlohmann::json& j, const InstanceStats& s);

}  // namespace modelci::telemetry
