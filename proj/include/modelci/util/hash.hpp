// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace modelci::util {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// IEEE CRC-32 (the zlib/PNG polynomial).
std::uint32_t crc32(std::string_view data);

}  // namespace modelci::util
