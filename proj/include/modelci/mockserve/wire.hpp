// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace modelci::mockserve {

// The "grpc-style" framed TCP protocol.
//
//   request  = u32 len | u8 method | body[len - 1]
//   response = u32 len | u8 status | body[len - 1]
//
// len is little-endian and counts the method/status byte. Bodies are JSON.
// Connections carry any number of request/response pairs in sequence.
enum class FrameMethod : std::uint8_t { Predict = 1, Health = 2 };
enum class FrameStatus : std::uint8_t { Ok = 0, BadRequest = 1, Unavailable = 2, Error = 3 };

inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

std::string encode_frame(std::uint8_t tag, std::string_view body);

// Reads one frame from a blocking socket. nullopt on EOF, timeout or a
// malformed length.
std::optional<std::pair<std::uint8_t, std::string>> read_frame(int fd);
bool write_all(int fd, std::string_view data);

int status_to_http(FrameStatus status) noexcept;

// Blocking client for one persistent connection.
class FramedClient {
public:
    FramedClient(std::string host, int port, std::chrono::milliseconds connect_timeout,
                 std::chrono::milliseconds io_timeout);
    ~FramedClient();
    FramedClient(const FramedClient&) = delete;
    FramedClient& operator=(const FramedClient&) = delete;

    struct Reply {
        FrameStatus status = FrameStatus::Error;
        std::string body;
    };

    // nullopt on any transport failure; the connection is re-established on
    // the next call.
    std::optional<Reply> call(FrameMethod method, std::string_view body);

private:
    bool connect();
    void disconnect();

    std::string host_;
    int port_;
    std::chrono::milliseconds connect_timeout_;
    std::chrono::milliseconds io_timeout_;
    int fd_ = -1;
};

}  // namespace modelci::mockserve
