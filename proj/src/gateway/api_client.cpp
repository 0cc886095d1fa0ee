// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/gateway/api_client.hpp"

#include <cstdlib>

#include <httplib.h>

namespace modelci::gateway {

using json = nlohmann::json;

json ApiResponse::json() const { return json::parse(body); }

void raise_api_error(const ApiResponse& response) {
    std::map<std::string, std::string> details;
    try {
        const auto j = json::parse(response.body);
        const auto code = parse_code(j.value("code", std::string()));
        if (j.contains("details") && j["details"].is_object()) {
            for (const auto& [k, v] : j["details"].items()) details[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        if (code) throw Error(*code, j.value("message", std::string()), std::move(details));
    } catch (const json::exception&) {
        // Not one of ours; fall through.
    }
    details["status"] = std::to_string(response.status);
    throw Error(ErrorCode::RequestFailure, "HTTP " + std::to_string(response.status) + ": " + response.body,
                std::move(details));
}

std::vector<Event> SseParser::feed(std::string_view chunk) {
    std::vector<Event> out;
    buffer_.append(chunk);
    std::size_t start = 0;
    for (;;) {
        const auto nl = buffer_.find('\n', start);
        if (nl == std::string::npos) break;
        std::string_view line(buffer_.data() + start, nl - start);
        start = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            if (has_data_) out.push_back(std::move(pending_));
            pending_ = {};
            has_data_ = false;
            continue;
        }
        if (line.front() == ':') continue;  // comment / keep-alive
        const auto colon = line.find(':');
        const auto name = line.substr(0, colon);
        auto value = colon == std::string_view::npos ? std::string_view() : line.substr(colon + 1);
        if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
        if (name == "id") {
            pending_.id = std::strtoull(std::string(value).c_str(), nullptr, 10);
        } else if (name == "event") {
            pending_.type = value;
        } else if (name == "data") {
            pending_.data = json::parse(value, nullptr, false);
            has_data_ = true;
        }
    }
    buffer_.erase(0, start);
    return out;
}

struct ApiClient::Impl {
    httplib::Client http;
    Impl(const std::string& url, std::chrono::milliseconds timeout) : http(url) {
        http.set_connection_timeout(std::chrono::seconds(5));
        http.set_read_timeout(timeout);
        http.set_write_timeout(timeout);
    }
};

namespace {

httplib::Headers to_headers(const ApiClient::Headers& h) { return {h.begin(), h.end()}; }

ApiResponse convert(const httplib::Result& r, const std::string& what) {
    if (!r) {
        throw Error(ErrorCode::RequestFailure, what + ": " + httplib::to_string(r.error()), {{"request", what}});
    }
    ApiResponse out;
    out.status = r->status;
    out.body = r->body;
    out.content_type = r->get_header_value("Content-Type");
    out.replayed = r->get_header_value("Idempotent-Replayed") == "true";
    return out;
}

}  // namespace

ApiClient::ApiClient(const std::string& base_url, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(base_url, timeout)), base_url_(base_url) {}

ApiClient::~ApiClient() = default;

ApiResponse ApiClient::get(const std::string& path, const Headers& headers) {
    return convert(impl_->http.Get(path, to_headers(headers)), "GET " + path);
}

ApiResponse ApiClient::post(const std::string& path, const json& body, const Headers& headers) {
    return convert(impl_->http.Post(path, to_headers(headers), body.dump(), "application/json"), "POST " + path);
}

ApiResponse ApiClient::patch(const std::string& path, const json& body, const Headers& headers) {
    return convert(impl_->http.Patch(path, to_headers(headers), body.dump(), "application/json"), "PATCH " + path);
}

ApiResponse ApiClient::del(const std::string& path, const Headers& headers) {
    return convert(impl_->http.Delete(path, to_headers(headers)), "DELETE " + path);
}

ApiResponse ApiClient::register_model(const std::string& manifest_yaml, const std::string& weights,
                                      const Headers& headers) {
    httplib::MultipartFormDataItems items = {
        {"manifest", manifest_yaml, "manifest.yaml", "application/yaml"},
        {"weights", weights, "weights.bin", "application/octet-stream"},
    };
    return convert(impl_->http.Post("/api/models", to_headers(headers), items), "POST /api/models");
}

void ApiClient::events(std::optional<std::uint64_t> last_event_id, const std::function<bool(const Event&)>& on_event) {
    httplib::Headers headers{{"Accept", "text/event-stream"}};
    if (last_event_id) headers.emplace("Last-Event-ID", std::to_string(*last_event_id));
    SseParser parser;
    bool stopped = false;
    auto r = impl_->http.Get("/api/events", headers, [&](const char* data, std::size_t n) {
        for (const auto& e : parser.feed(std::string_view(data, n))) {
            if (!on_event(e)) {
                stopped = true;
                return false;
            }
        }
        return true;
    });
    if (!r && !stopped && r.error() != httplib::Error::Canceled) {
        throw Error(ErrorCode::RequestFailure, "GET /api/events: " + httplib::to_string(r.error()));
    }
}

std::string default_api_url() {
    if (const char* url = std::getenv("MODELCI_URL"); url && *url) return url;
    return "http://127.0.0.1:8765";
}

}  // namespace modelci::gateway
