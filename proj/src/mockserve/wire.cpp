// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/mockserve/wire.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace modelci::mockserve {

namespace {

bool read_exact(int fd, char* out, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, out + got, n - got, 0);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) return false;
        got += static_cast<std::size_t>(r);
    }
    return true;
}

}  // namespace

std::string encode_frame(std::uint8_t tag, std::string_view body) {
    const auto len = static_cast<std::uint32_t>(body.size() + 1);
    std::string out;
    out.reserve(len + 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    out.push_back(static_cast<char>(tag));
    out.append(body);
    return out;
}

std::optional<std::pair<std::uint8_t, std::string>> read_frame(int fd) {
    unsigned char header[4];
    if (!read_exact(fd, reinterpret_cast<char*>(header), 4)) return std::nullopt;
    const std::uint32_t len = header[0] | (header[1] << 8) | (header[2] << 16) |
                              (static_cast<std::uint32_t>(header[3]) << 24);
    if (len < 1 || len > kMaxFrameBytes) return std::nullopt;
    std::string payload(len, '\0');
    if (!read_exact(fd, payload.data(), len)) return std::nullopt;
    const auto tag = static_cast<std::uint8_t>(payload[0]);
    payload.erase(0, 1);
    return std::make_pair(tag, std::move(payload));
}

bool write_all(int fd, std::string_view data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

int status_to_http(FrameStatus status) noexcept {
    switch (status) {
        case FrameStatus::Ok: return 200;
        case FrameStatus::BadRequest: return 400;
        case FrameStatus::Unavailable: return 503;
        case FrameStatus::Error: return 500;
    }
    return 500;
}

FramedClient::FramedClient(std::string host, int port, std::chrono::milliseconds connect_timeout,
                           std::chrono::milliseconds io_timeout)
    : host_(std::move(host)), port_(port), connect_timeout_(connect_timeout), io_timeout_(io_timeout) {}

FramedClient::~FramedClient() { disconnect(); }

void FramedClient::disconnect() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

bool FramedClient::connect() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &res) != 0) return false;
    for (addrinfo* ai = res; ai != nullptr && fd_ < 0; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
        if (fd < 0) continue;
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, static_cast<int>(connect_timeout_.count())) == 1 ? 0 : -1;
            int err = 0;
            socklen_t len = sizeof err;
            if (rc == 0 && (::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0)) rc = -1;
        }
        if (rc != 0) {
            ::close(fd);
            continue;
        }
        ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
        timeval tv{};
        tv.tv_sec = io_timeout_.count() / 1000;
        tv.tv_usec = (io_timeout_.count() % 1000) * 1000;
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        fd_ = fd;
    }
    ::freeaddrinfo(res);
    return fd_ >= 0;
}

std::optional<FramedClient::Reply> FramedClient::call(FrameMethod method, std::string_view body) {
    if (fd_ < 0 && !connect()) return std::nullopt;
    if (!write_all(fd_, encode_frame(static_cast<std::uint8_t>(method), body))) {
        disconnect();
        return std::nullopt;
    }
    auto frame = read_frame(fd_);
    if (!frame || frame->first > static_cast<std::uint8_t>(FrameStatus::Error)) {
        disconnect();
        return std::nullopt;
    }
    return Reply{static_cast<FrameStatus>(frame->first), std::move(frame->second)};
}

}  // namespace modelci::mockserve
