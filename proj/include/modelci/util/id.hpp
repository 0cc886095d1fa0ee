// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <string>

namespace modelci::util {

// 128 random bits as 32 lowercase hex characters.
std::string new_id();

}  // namespace modelci::util
