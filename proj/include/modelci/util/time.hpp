// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <string>

namespace modelci::util {

using WallClock = std::chrono::system_clock;
using Timestamp = std::chrono::time_point<WallClock, std::chrono::milliseconds>;

Timestamp now();

// RFC 3339 UTC with millisecond precision, e.g. 2026-10-16T08:30:00.125Z.
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(const std::string& text);

std::int64_t to_unix_ms(Timestamp t);

}  // namespace modelci::util
