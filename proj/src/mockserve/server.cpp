// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/mockserve/server.hpp"

#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <arpa/inet.h>
#include <netdb.h>

#include <atomic>
#include <list>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "modelci/error.hpp"
#include "modelci/util/thread_per_task.hpp"

namespace modelci::mockserve {

using json = nlohmann::json;

namespace {

std::string status_body(std::string_view status) { return json{{"status", status}}.dump(); }

std::string error_body(std::string_view message) { return json{{"error", message}}.dump(); }

}  // namespace

class MockServer::Impl {
public:
    explicit Impl(MockServer& owner) : owner_(owner) {}
    ~Impl() { stop(); }

    int start_rest(const std::string& host, int port) {
        server_.new_task_queue = [] { return new util::ThreadPerTask(); };
        server_.set_keep_alive_max_count(1 << 30);
        server_.set_keep_alive_timeout(2);
        server_.set_tcp_nodelay(true);
        server_.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
            auto [status, body] = owner_.predict(req.body);
            res.status = status_to_http(status);
            res.set_content(body, "application/json");
        });
        server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            auto [status, body] = owner_.health();
            res.status = status_to_http(status);
            res.set_content(body, "application/json");
        });
        const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) {
            throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
        }
        rest_thread_ = std::thread([this] { server_.listen_after_bind(); });
        // stop() is a no-op until the listener is running, so wait for it here.
        server_.wait_until_ready();
        rest_ = true;
        return bound;
    }

    int start_framed(const std::string& host, int port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        hints.ai_flags = AI_PASSIVE;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr) {
            throw Error(ErrorCode::BindFailure, "cannot resolve " + host);
        }
        const int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, 0);
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        const bool ok = fd >= 0 && ::bind(fd, res->ai_addr, res->ai_addrlen) == 0 && ::listen(fd, 512) == 0;
        ::freeaddrinfo(res);
        if (!ok) {
            if (fd >= 0) ::close(fd);
            throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
        }
        sockaddr_storage addr{};
        socklen_t len = sizeof addr;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
        const int bound = addr.ss_family == AF_INET6
                              ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                              : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
        listen_fd_ = fd;
        accept_thread_ = std::thread([this] { accept_loop(); });
        return bound;
    }

    void stop() {
        if (rest_) {
            server_.stop();
            if (rest_thread_.joinable()) rest_thread_.join();
            rest_ = false;
        }
        if (listen_fd_ >= 0) {
            stopping_ = true;
            if (accept_thread_.joinable()) accept_thread_.join();
            ::close(listen_fd_);
            listen_fd_ = -1;
            {
                std::lock_guard lock(conn_mu_);
                for (int c : connections_) ::shutdown(c, SHUT_RDWR);
            }
            workers_.shutdown();
        }
    }

private:
    void accept_loop() {
        while (!stopping_) {
            pollfd pfd{listen_fd_, POLLIN, 0};
            if (::poll(&pfd, 1, 50) <= 0) continue;
            const int c = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
            if (c < 0) continue;
            int one = 1;
            ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            {
                std::lock_guard lock(conn_mu_);
                connections_.insert(c);
            }
            if (!workers_.enqueue([this, c] { serve_connection(c); })) {
                forget(c);
            }
        }
    }

    void serve_connection(int fd) {
        while (auto frame = read_frame(fd)) {
            std::pair<FrameStatus, std::string> reply;
            switch (static_cast<FrameMethod>(frame->first)) {
                case FrameMethod::Predict: reply = owner_.predict(frame->second); break;
                case FrameMethod::Health: reply = owner_.health(); break;
                default: reply = {FrameStatus::BadRequest, error_body("unknown method")}; break;
            }
            if (!write_all(fd, encode_frame(static_cast<std::uint8_t>(reply.first), reply.second))) break;
        }
        forget(fd);
    }

    void forget(int fd) {
        std::lock_guard lock(conn_mu_);
        connections_.erase(fd);
        ::close(fd);
    }

    MockServer& owner_;
    httplib::Server server_;
    std::thread rest_thread_;
    bool rest_ = false;

    int listen_fd_ = -1;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex conn_mu_;
    std::set<int> connections_;
    util::ThreadPerTask workers_;
};

MockServer::MockServer(MockServeOptions options)
    : options_(std::move(options)),
      graph_(converter::decode_toy_any(options_.model_bytes)),
      timer_(options_.latency, options_.seed),
      started_(std::chrono::steady_clock::now()) {}

MockServer::~MockServer() { stop(); }

int MockServer::start() {
    if (impl_) return port_;
    impl_ = std::make_unique<Impl>(*this);
    started_ = std::chrono::steady_clock::now();
    port_ = options_.protocol == Protocol::Rest ? impl_->start_rest(options_.host, options_.port)
                                                : impl_->start_framed(options_.host, options_.port);
    return port_;
}

void MockServer::stop() {
    if (impl_) {
        impl_->stop();
        impl_.reset();
    }
}

std::int64_t MockServer::elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started_)
        .count();
}

std::pair<FrameStatus, std::string> MockServer::health() const {
    const auto elapsed = elapsed_ms();
    if (elapsed < options_.ready_delay.count()) return {FrameStatus::Unavailable, status_body("starting")};
    if (!options_.faults.state_at(elapsed).health_ok) return {FrameStatus::Unavailable, status_body("unhealthy")};
    return {FrameStatus::Ok, status_body("ok")};
}

std::pair<FrameStatus, std::string> MockServer::predict(const std::string& body) {
    const auto arrived = std::chrono::steady_clock::now();
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("inputs") || !doc["inputs"].is_array()) {
        return {FrameStatus::BadRequest, error_body("body must be {\"inputs\": [[...], ...]}")};
    }
    const auto& inputs = doc["inputs"];
    if (inputs.empty()) return {FrameStatus::BadRequest, error_body("empty batch")};
    const auto dim = graph_.input_dim();
    std::vector<std::vector<double>> rows;
    rows.reserve(inputs.size());
    for (const auto& row : inputs) {
        if (!row.is_array() || row.size() != dim) {
            return {FrameStatus::BadRequest,
                    error_body("each input must have " + std::to_string(dim) + " values")};
        }
        std::vector<double> values;
        values.reserve(dim);
        for (const auto& v : row) {
            if (!v.is_number()) return {FrameStatus::BadRequest, error_body("inputs must be numeric")};
            values.push_back(v.get<double>());
        }
        rows.push_back(std::move(values));
    }
    if (!options_.faults.state_at(elapsed_ms()).predict_ok) {
        return {FrameStatus::Error, error_body("injected fault")};
    }

    const int batch = static_cast<int>(rows.size());
    const double service_ms = timer_.service_time_ms(batch);
    json outputs = json::array();
    for (const auto& row : rows) outputs.push_back(graph_.forward(row));
    std::this_thread::sleep_until(arrived + std::chrono::duration<double, std::milli>(service_ms));
    return {FrameStatus::Ok, json{{"outputs", std::move(outputs)}, {"batch_size", batch}}.dump()};
}

}  // namespace modelci::mockserve
