// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "modelci/converter/toy_model.hpp"
#include "modelci/mockserve/latency_model.hpp"
#include "modelci/mockserve/wire.hpp"
#include "modelci/protocol.hpp"

namespace modelci::mockserve {

struct MockServeOptions {
    std::string model_bytes;  // toy-json or toy-binary
    LatencyModel latency;
    std::uint64_t seed = 0;
    FaultScript faults;
    Protocol protocol = Protocol::Rest;
    std::string host = "127.0.0.1";
    int port = 0;  // 0 lets the OS pick
    // /health reports unavailable until this much time has passed.
    std::chrono::milliseconds ready_delay{0};
};

// Serves one toy model. REST exposes POST /predict and GET /health; the
// framed protocol carries the same JSON bodies (see wire.hpp).
//
// Each connection is handled by its own thread, one request at a time.
class MockServer {
public:
    // Throws Error(InvalidModel) if the model does not decode.
    explicit MockServer(MockServeOptions options);
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    // Binds and starts serving in the background. Returns the bound port.
    // Throws Error(BindFailure).
    int start();
    void stop();
    int port() const noexcept { return port_; }

    // Protocol-independent handlers, exposed for tests.
    std::pair<FrameStatus, std::string> predict(const std::string& body);
    std::pair<FrameStatus, std::string> health() const;

private:
    class Impl;
    std::int64_t elapsed_ms() const;

    MockServeOptions options_;
    converter::ToyGraph graph_;
    ServiceTimer timer_;
    std::chrono::steady_clock::time_point started_;
    int port_ = 0;
    std::unique_ptr<Impl> impl_;
};

}  // namespace modelci::mockserve
