// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/util/fs.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "modelci/error.hpp"
#include "modelci/util/id.hpp"

namespace fs = std::filesystem;

namespace modelci::util {

namespace {

[[noreturn]] void fail(const std::string& what, const fs::path& path) {
    throw Error(ErrorCode::StorageFailure,
                what + " " + path.string() + ": " + std::strerror(errno));
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view data) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp-" + new_id());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) fail("cannot create", tmp);
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            ::unlink(tmp.c_str());
            fail("cannot write", tmp);
        }
        off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        ::unlink(tmp.c_str());
        fail("cannot flush", tmp);
    }
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        ::unlink(tmp.c_str());
        fail("cannot rename onto", path);
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::StorageFailure, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path make_temp_dir(const fs::path& parent, std::string_view prefix) {
    fs::create_directories(parent);
    for (int attempt = 0; attempt < 16; ++attempt) {
        fs::path dir = parent / (std::string(prefix) + new_id().substr(0, 12));
        if (fs::create_directory(dir)) return dir;
    }
    throw Error(ErrorCode::StorageFailure, "cannot create temp dir under " + parent.string());
}

}  // namespace modelci::util
