// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/client.hpp"

#include <httplib.h>

#include "modelci/mockserve/wire.hpp"

namespace modelci {

namespace {

template <class Rep, class Period>
std::pair<time_t, time_t> split(std::chrono::duration<Rep, Period> d) {
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(d).count();
    return {static_cast<time_t>(us / 1000000), static_cast<time_t>(us % 1000000)};
}

}  // namespace

class ServiceClient::Impl {
public:
    Impl(Endpoint endpoint, Protocol protocol, std::chrono::milliseconds connect_timeout,
         std::chrono::milliseconds io_timeout)
        : protocol_(protocol) {
        if (protocol_ == Protocol::Rest) {
            http_ = std::make_unique<httplib::Client>(endpoint.host, endpoint.port);
            http_->set_keep_alive(true);
            http_->set_tcp_nodelay(true);
            auto [cs, cus] = split(connect_timeout);
            auto [is, ius] = split(io_timeout);
            http_->set_connection_timeout(cs, cus);
            http_->set_read_timeout(is, ius);
            http_->set_write_timeout(is, ius);
        } else {
            framed_ = std::make_unique<mockserve::FramedClient>(endpoint.host, endpoint.port, connect_timeout,
                                                                io_timeout);
        }
    }

    std::optional<Response> call(bool predict, const std::string& body) {
        if (http_) {
            auto res = predict ? http_->Post("/predict", body, "application/json") : http_->Get("/health");
            if (!res) return std::nullopt;
            return Response{res->status, std::move(res->body)};
        }
        auto reply = framed_->call(predict ? mockserve::FrameMethod::Predict : mockserve::FrameMethod::Health, body);
        if (!reply) return std::nullopt;
        return Response{mockserve::status_to_http(reply->status), std::move(reply->body)};
    }

private:
    Protocol protocol_;
    std::unique_ptr<httplib::Client> http_;
    std::unique_ptr<mockserve::FramedClient> framed_;
};

ServiceClient::ServiceClient(Endpoint endpoint, Protocol protocol, std::chrono::milliseconds connect_timeout,
                             std::chrono::milliseconds io_timeout)
    : impl_(std::make_unique<Impl>(std::move(endpoint), protocol, connect_timeout, io_timeout)) {}

ServiceClient::~ServiceClient() = default;

std::optional<ServiceClient::Response> ServiceClient::predict(const std::string& body) { return impl_->call(true, body); }

std::optional<ServiceClient::Response> ServiceClient::health() { return impl_->call(false, ""); }

std::string make_predict_body(int batch_size, int input_dim) {
    std::string row = "[";
    for (int i = 0; i < input_dim; ++i) {
        if (i) row += ',';
        row += std::to_string((i % 7) - 3);
    }
    row += ']';
    std::string body = R"({"inputs":[)";
    for (int b = 0; b < batch_size; ++b) {
        if (b) body += ',';
        body += row;
    }
    body += "]}";
    return body;
}

}  // namespace modelci
