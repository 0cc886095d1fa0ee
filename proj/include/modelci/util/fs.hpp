// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace modelci::util {

// Writes to a sibling temp file, fsyncs, then renames over `path`. Readers see
// either the old content or the new content, never a torn write.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::string read_file(const std::filesystem::path& path);

// Creates a fresh, uniquely named directory under `parent`.
std::filesystem::path make_temp_dir(const std::filesystem::path& parent,
                                    std::string_view prefix);

}  // namespace modelci::util
