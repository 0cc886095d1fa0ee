// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/gateway/api_server.hpp"

#include <httplib.h>

#include "modelci/profiler/job.hpp"
#include "modelci/util/hash.hpp"
#include "modelci/util/thread_per_task.hpp"

namespace modelci::gateway {

using json = nlohmann::json;

json error_body(const Error& e) {
    json details = json::object();
    for (const auto& [k, v] : e.details()) details[k] = v;
    return {{"code", code_name(e.code())}, {"message", e.what()}, {"details", details}};
}

IdempotencyCache::Outcome IdempotencyCache::begin(const std::string& key, const std::string& fingerprint,
                                                  Stored& replay) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
        if (it->second.fingerprint != fingerprint) return Outcome::Mismatch;
        if (!it->second.done) return Outcome::InFlight;
        replay = it->second.response;
        return Outcome::Replay;
    }
    if (entries_.size() >= capacity_) {
        // Forget the oldest finished entry.
        auto oldest = entries_.end();
        for (auto e = entries_.begin(); e != entries_.end(); ++e) {
            if (e->second.done && (oldest == entries_.end() || e->second.order < oldest->second.order)) oldest = e;
        }
        if (oldest != entries_.end()) entries_.erase(oldest);
    }
    entries_[key] = {fingerprint, false, {}, next_order_++};
    return Outcome::Fresh;
}

void IdempotencyCache::complete(const std::string& key, Stored response) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return;
    it->second.done = true;
    it->second.response = std::move(response);
}

void IdempotencyCache::abandon(const std::string& key) {
    std::lock_guard lock(mu_);
    entries_.erase(key);
}

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status(e.code()), error_body(e)); }

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("request body is not valid JSON: ") + e.what());
    }
}

template <typename T>
T field(const json& body, const char* key, T fallback) {
    if (!body.contains(key) || body.at(key).is_null()) return fallback;
    try {
        return body.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' has the wrong type", {{"field", key}});
    }
}

}  // namespace

struct ApiServer::Impl {
    Platform& platform;
    std::string host;
    int requested_port;
    httplib::Server server;
    std::thread thread;
    IdempotencyCache idempotency;
    std::atomic<bool> stopping{false};

    Impl(Platform& p, std::string h, int port) : platform(p), host(std::move(h)), requested_port(port) {}

    // Error mapping for every endpoint.
    Handler guarded(Handler fn) {
        return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const json::exception& e) {
                send_error(res, Error(ErrorCode::InvalidArgument, e.what()));
            } catch (const std::exception& e) {
                send_error(res, Error(ErrorCode::Internal, e.what()));
            }
        };
    }

    // State-changing endpoints: error mapping plus Idempotency-Key handling.
    Handler mutating(Handler fn) {
        return [this, fn = guarded(std::move(fn))](const httplib::Request& req, httplib::Response& res) {
            const auto key = req.get_header_value("Idempotency-Key");
            if (key.empty()) {
                fn(req, res);
                return;
            }
            // Multipart parts are parsed out of the body, so hash them explicitly.
            std::string payload = req.body;
            for (const auto& [name, part] : req.files) {
                payload += "\n--" + name + ":" + part.filename + ":" + util::sha256_hex(part.content);
            }
            const auto fingerprint = req.method + " " + req.path + " " + util::sha256_hex(payload);
            IdempotencyCache::Stored stored;
            switch (idempotency.begin(key, fingerprint, stored)) {
                case IdempotencyCache::Outcome::Replay:
                    res.status = stored.status;
                    res.set_content(stored.body, stored.content_type);
                    res.set_header("Idempotent-Replayed", "true");
                    return;
                case IdempotencyCache::Outcome::Mismatch:
                    send_error(res, Error(ErrorCode::IdempotencyConflict, "Idempotency-Key reused for a different request",
                                          {{"key", key}}));
                    return;
                case IdempotencyCache::Outcome::InFlight:
                    send_error(res, Error(ErrorCode::Conflict, "a request with this Idempotency-Key is in progress",
                                          {{"key", key}}));
                    return;
                case IdempotencyCache::Outcome::Fresh:
                    break;
            }
            fn(req, res);
            if (res.status >= 500) {
                idempotency.abandon(key);  // let the client retry
            } else {
                idempotency.complete(key, {res.status, res.body, res.get_header_value("Content-Type")});
            }
        };
    }

    void routes();
    void events(const httplib::Request& req, httplib::Response& res);
};

void ApiServer::Impl::routes() {
    server.Get("/api/health", guarded([](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, {{"status", "ok"}});
               }));

    server.Post("/api/models", mutating([this](const httplib::Request& req, httplib::Response& res) {
                    if (!req.is_multipart_form_data() || !req.has_file("manifest") || !req.has_file("weights")) {
                        throw Error(ErrorCode::InvalidArgument,
                                    "expected multipart/form-data with 'manifest' and 'weights' parts");
                    }
                    const auto record = platform.register_model(req.get_file_value("manifest").content,
                                                                req.get_file_value("weights").content);
                    send_json(res, 201, record);
                }));

    server.Get("/api/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   registry::ModelQuery q;
                   if (req.has_param("name")) q.name = req.get_param_value("name");
                   if (req.has_param("framework")) q.framework = req.get_param_value("framework");
                   if (req.has_param("task")) q.task = req.get_param_value("task");
                   if (req.has_param("status")) q.status = registry::parse_status(req.get_param_value("status"));
                   send_json(res, 200, platform.list_models(q));
               }));

    server.Get(R"(/api/models/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, platform.get_model(req.matches[1]));
               }));

    server.Patch(R"(/api/models/([^/]+))", mutating([this](const httplib::Request& req, httplib::Response& res) {
                     std::optional<std::string> if_match;
                     if (req.has_header("If-Match")) if_match = req.get_header_value("If-Match");
                     send_json(res, 200, platform.update_model(req.matches[1], parse_body(req), if_match));
                 }));

    server.Delete(R"(/api/models/([^/]+))", mutating([this](const httplib::Request& req, httplib::Response& res) {
                      send_json(res, 200, platform.delete_model(req.matches[1]));
                  }));

    server.Post(R"(/api/models/([^/]+)/convert)", mutating([this](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req);
                    send_json(res, 200, platform.convert(req.matches[1], field<std::vector<std::string>>(body, "targets", {})));
                }));

    server.Post(R"(/api/models/([^/]+)/profile)", mutating([this](const httplib::Request& req, httplib::Response& res) {
                    send_json(res, 202, {{"jobs", platform.profile(req.matches[1], parse_body(req))}});
                }));

    server.Get(R"(/api/models/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const auto results = platform.results(req.matches[1]);
                   if (req.get_param_value("format") == "csv") {
                       res.status = 200;
                       res.set_content(profiler::results_csv(results), "text/csv");
                       return;
                   }
                   send_json(res, 200, results);
               }));

    server.Post(R"(/api/models/([^/]+)/deploy)", mutating([this](const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req);
                    DeployRequest d;
                    if (body.contains("variant_id")) d.variant_id = field<std::string>(body, "variant_id", "");
                    if (body.contains("device")) d.device = field<std::string>(body, "device", "");
                    d.backend = field<std::string>(body, "backend", d.backend);
                    d.protocol = parse_protocol(field<std::string>(body, "protocol", "rest"));
                    const auto out = platform.deploy(req.matches[1], d);
                    if (out.instance) {
                        send_json(res, 201, *out.instance);
                    } else {
                        send_json(res, 202, {{"placement_id", out.placement_id}, {"state", "pending"}});
                    }
                }));

    // Stopped instances stay listed only with ?all=true.
    server.Get("/api/instances", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const bool all = req.get_param_value("all") == "true";
                   json out = json::array();
                   for (const auto& i : platform.instances()) {
                       if (all || i.state != dispatcher::InstanceState::Stopped) out.push_back(i);
                   }
                   send_json(res, 200, out);
               }));
    server.Get(R"(/api/instances/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   for (const auto& i : platform.instances()) {
                       if (i.id == req.matches[1]) {
                           send_json(res, 200, i);
                           return;
                       }
                   }
                   throw Error(ErrorCode::NotFound, "no instance " + std::string(req.matches[1]),
                               {{"id", req.matches[1]}});
               }));
    server.Delete(R"(/api/instances/([^/]+))", mutating([this](const httplib::Request& req, httplib::Response& res) {
                      send_json(res, 200, platform.stop_instance(req.matches[1]));
                  }));

    server.Get("/api/devices", guarded([this](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, platform.devices());
               }));
    server.Get("/api/jobs", guarded([this](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, platform.jobs());
               }));
    server.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, platform.job(req.matches[1]));
               }));
    server.Get("/api/controller", guarded([this](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, platform.controller_status());
               }));
    server.Get("/api/placements", guarded([this](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, platform.placements());
               }));
    server.Get("/api/backends", guarded([this](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, platform.backends());
               }));

    server.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) { events(req, res); });

    server.Get("/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
                   res.status = 200;
                   res.set_content(platform.metrics(), "text/plain; version=0.0.4");
               }));

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) {
            send_error(res, Error(ErrorCode::NotFound, "no route for " + req.method + " " + req.path));
        }
    });
}

void ApiServer::Impl::events(const httplib::Request& req, httplib::Response& res) {
    std::optional<std::uint64_t> last_id;
    auto header = req.get_header_value("Last-Event-ID");
    if (header.empty()) header = req.get_param_value("last_event_id");
    if (!header.empty()) {
        try {
            last_id = std::stoull(header);
        } catch (const std::exception&) {
            send_error(res, Error(ErrorCode::InvalidArgument, "bad Last-Event-ID"));
            return;
        }
    }
    auto stream = platform.events().subscribe(last_id);
    res.set_header("Cache-Control", "no-cache");
    res.set_header("X-Accel-Buffering", "no");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, stream, first = true](std::size_t, httplib::DataSink& sink) mutable {
            if (first) {
                first = false;
                const std::string hello = "retry: 1000\n: connected\n\n";
                if (!sink.write(hello.data(), hello.size())) return false;
            }
            auto event = stream->next(std::chrono::milliseconds(500));
            if (stopping) return false;
            if (!event) {
                if (!sink.is_writable()) return false;
                const std::string ping = ": ping\n\n";
                return sink.write(ping.data(), ping.size());
            }
            const auto text = format_sse(*event);
            return sink.write(text.data(), text.size());
        },
        [this, stream](bool) { platform.events().unsubscribe(stream); });
}

ApiServer::ApiServer(Platform& platform, std::string host, int port)
    : impl_(std::make_unique<Impl>(platform, std::move(host), port)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start() {
    auto& s = impl_->server;
    s.new_task_queue = [] { return new util::ThreadPerTask(); };
    s.set_tcp_nodelay(true);
    s.set_payload_max_length(512ull << 20);
    impl_->routes();
    const int bound = impl_->requested_port == 0 ? s.bind_to_any_port(impl_->host)
                                                 : (s.bind_to_port(impl_->host, impl_->requested_port)
                                                        ? impl_->requested_port
                                                        : -1);
    if (bound < 0) {
        throw Error(ErrorCode::BindFailure, "cannot bind " + impl_->host + ":" + std::to_string(impl_->requested_port),
                    {{"host", impl_->host}, {"port", std::to_string(impl_->requested_port)}});
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    port_ = bound;
    return bound;
}

void ApiServer::stop() {
    if (!impl_ || !impl_->thread.joinable()) return;
    impl_->stopping = true;
    impl_->server.stop();
    impl_->thread.join();
}

}  // namespace modelci::gateway
