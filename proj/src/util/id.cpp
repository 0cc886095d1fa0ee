// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/util/id.hpp"

#include <cstdio>
#include <mutex>
#include <random>

namespace modelci::util {

std::string new_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;
    {
        std::lock_guard lock(mu);
        hi = rng();
        lo = rng();
    }
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
}

}  // namespace modelci::util
