// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "modelci/client.hpp"
#include "modelci/gateway/api_client.hpp"
#include "modelci/gateway/api_server.hpp"
#include "modelci/gateway/config.hpp"
#include "modelci/gateway/events.hpp"
#include "modelci/gateway/platform.hpp"
#include "modelci/telemetry/provider.hpp"
#include "modelci/util/fs.hpp"
#include "test_support.hpp"
#include "toy_graphs.hpp"

using namespace modelci;
using namespace modelci::gateway;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

const char* kToyManifest = R"(name: toy
framework: toy
task: regression
dataset: synthetic
inputs:
  - {name: x, shape: [-1, 4], dtype: float64}
outputs:
  - {name: y, shape: [-1, 2], dtype: float64}
)";

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Internal;
}

// A daemon on an ephemeral port over a temp store, one synthetic idle cpu:0.
struct Daemon {
    testing::TempDir dir;
    DaemonConfig config;
    std::unique_ptr<Platform> platform;
    std::unique_ptr<ApiServer> server;
    int port = 0;

    explicit Daemon(std::vector<int> batch_sizes = {1, 2}) {
        config.store_path = dir / "store";
        config.bind_port = 0;
        config.telemetry.interval = 50ms;
        config.profiling.batch_sizes = std::move(batch_sizes);
        config.profiling.requests_per_cell = 10;
        config.profiling.warmup_requests = 1;
        config.profiling.sample_interval_ms = 20;
        config.mockserve_path = MODELCI_MOCKSERVE_BIN;
        config.mockserve_args = {"--base-ms", "1"};
        config.ready_timeout = 10s;
        config.health_interval = 200ms;
        dispatcher::ServingBackendTemplate onnx;
        onnx.name = "onnx-serve";
        onnx.accepted_formats = {"onnx"};
        onnx.protocols = {Protocol::Rest};
        onnx.launch.command = {"/bin/false"};
        config.backends.push_back(onnx);
        start();
    }

    void start() {
        platform = std::make_unique<Platform>(
            config, std::make_shared<telemetry::SyntheticProvider>(
                        telemetry::SyntheticProvider::parse_trace("0 cpu:0 0.05 100 1000\n"),
                        telemetry::SyntheticProvider::Mode::Step));
        platform->start();
        server = std::make_unique<ApiServer>(*platform, "127.0.0.1", 0);
        port = server->start();
    }

    ~Daemon() {
        server->stop();
        platform->shutdown();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

json wait_for_job(ApiClient& c, const std::string& job_id, std::chrono::seconds limit = 60s) {
    const auto deadline = std::chrono::steady_clock::now() + limit;
    for (;;) {
        const auto j = c.get("/api/jobs/" + job_id).json();
        if (j["state"] == "completed" || j["state"] == "failed") return j;
        if (std::chrono::steady_clock::now() > deadline) {
            FAIL("job did not finish: " << j.dump());
            return j;
        }
        std::this_thread::sleep_for(50ms);
    }
}

std::string cli(const Daemon& d, const std::string& args, int* status = nullptr) {
    const auto cmd = std::string(MODELCI_CLI_BIN) + " --url " + d.url() + " " + args + " 2>&1";
    std::string out;
    FILE* p = ::popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    const int rc = ::pclose(p);
    if (status) *status = WEXITSTATUS(rc);
    return out;
}

}  // namespace

TEST_CASE("config file keys") {
    testing::TempDir dir;
    const auto c = parse_config(R"(
store_path: data
bind: 0.0.0.0:9000
telemetry: {provider: synthetic, trace: trace.txt, realtime: false, interval_ms: 250}
controller: {idle_threshold: 0.3, consecutive_samples: 5}
profiling: {batch_sizes: [1, 8], requests_per_cell: 20}
dispatcher: {mockserve: /opt/mockserve, mockserve_args: [--base-ms, "10"], ready_timeout_ms: 5000}
)",
                                dir.path());
    CHECK(c.store_path == dir.path() / "data");
    CHECK(c.runtime_dir == dir.path() / "data" / "runtime");
    CHECK(c.bind_host == "0.0.0.0");
    CHECK(c.bind_port == 9000);
    CHECK(c.telemetry.provider == "synthetic");
    CHECK(c.telemetry.trace == dir.path() / "trace.txt");
    CHECK_FALSE(c.telemetry.realtime);
    CHECK(c.telemetry.interval == 250ms);
    CHECK(c.controller.idle_threshold == doctest::Approx(0.3));
    CHECK(c.controller.consecutive_samples == 5);
    CHECK(c.profiling.batch_sizes == std::vector<int>{1, 8});
    CHECK(c.profiling.requests_per_cell == 20);
    CHECK(c.mockserve_path == "/opt/mockserve");
    CHECK(c.mockserve_args == std::vector<std::string>{"--base-ms", "10"});
    CHECK(c.ready_timeout == 5000ms);

    CHECK(code_of([] { parse_config("bind: nocolon\n"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { parse_config("controller: {idle_threshold: 1.5}\n"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { parse_config("telemetry: {provider: synthetic}\n"); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { parse_config("[not, a, map]\n"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("MODELCI_CONFIG picks the config file unless a path is given") {
    ::unsetenv("MODELCI_CONFIG");
    CHECK_FALSE(resolve_config_path(std::nullopt).has_value());
    ::setenv("MODELCI_CONFIG", "/etc/modelci.yaml", 1);
    CHECK(resolve_config_path(std::nullopt) == std::filesystem::path("/etc/modelci.yaml"));
    CHECK(resolve_config_path(std::filesystem::path("local.yaml")) == std::filesystem::path("local.yaml"));
    ::unsetenv("MODELCI_CONFIG");
}

TEST_CASE("SSE framing survives arbitrary chunking") {
    std::vector<Event> sent;
    std::string wire = ": hello\n\nretry: 1000\n\n";
    for (std::uint64_t i = 1; i <= 20; ++i) {
        Event e{i, i % 2 ? "model" : "snapshot", json{{"n", i}, {"text", "line\nbreak: \"quoted\""}}};
        sent.push_back(e);
        wire += format_sse(e);
        if (i % 5 == 0) wire += ": ping\n\n";
    }
    std::mt19937_64 rng(7);
    for (int round = 0; round < 50; ++round) {
        SseParser parser;
        std::vector<Event> got;
        for (std::size_t pos = 0; pos < wire.size();) {
            const std::size_t n = std::min<std::size_t>(1 + rng() % 40, wire.size() - pos);
            for (auto& e : parser.feed(std::string_view(wire).substr(pos, n))) got.push_back(std::move(e));
            pos += n;
        }
        REQUIRE(got.size() == sent.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].id == sent[i].id);
            CHECK(got[i].type == sent[i].type);
            CHECK(got[i].data == sent[i].data);
        }
    }
}

TEST_CASE("event bus replays history after Last-Event-ID") {
    EventBus bus(4, 8);
    for (int i = 0; i < 6; ++i) bus.publish("tick", {{"i", i}});
    auto s = bus.subscribe(std::uint64_t{3});
    std::vector<std::uint64_t> ids;
    while (auto e = s->next(0ms)) ids.push_back(e->id);
    CHECK(ids == std::vector<std::uint64_t>{4, 5, 6});

    auto live = bus.subscribe(std::nullopt);
    CHECK_FALSE(live->next(0ms).has_value());
    bus.publish("tick", {});
    CHECK(live->next(100ms)->id == 7);

    // A slow reader loses its oldest events, not the newest.
    for (int i = 0; i < 20; ++i) bus.publish("flood", {{"i", i}});
    CHECK(live->dropped() == 12);
    CHECK(live->next(0ms)->data["i"] == 12);
    // Closing keeps what is buffered, then reports the end without waiting.
    bus.close_all();
    int rest = 0;
    while (live->next(10s)) ++rest;
    CHECK(rest == 7);
}

TEST_CASE("idempotency cache outcomes") {
    IdempotencyCache cache(2);
    IdempotencyCache::Stored replay;
    CHECK(cache.begin("k1", "POST /a x", replay) == IdempotencyCache::Outcome::Fresh);
    CHECK(cache.begin("k1", "POST /a x", replay) == IdempotencyCache::Outcome::InFlight);
    CHECK(cache.begin("k1", "POST /a y", replay) == IdempotencyCache::Outcome::Mismatch);
    cache.complete("k1", {201, "{}", "application/json"});
    CHECK(cache.begin("k1", "POST /a x", replay) == IdempotencyCache::Outcome::Replay);
    CHECK(replay.status == 201);

    CHECK(cache.begin("k2", "f", replay) == IdempotencyCache::Outcome::Fresh);
    cache.abandon("k2");
    CHECK(cache.begin("k2", "f", replay) == IdempotencyCache::Outcome::Fresh);
    cache.complete("k2", {200, "", ""});
    // At capacity the oldest finished entry goes.
    CHECK(cache.begin("k3", "f", replay) == IdempotencyCache::Outcome::Fresh);
    CHECK(cache.begin("k1", "other", replay) == IdempotencyCache::Outcome::Fresh);
}

TEST_CASE("error bodies carry the code name and details") {
    const auto body = error_body(Error(ErrorCode::UnknownDevice, "no such device", {{"device", "gpu:9"}}));
    CHECK(body["code"] == "UNKNOWN_DEVICE");
    CHECK(body["message"] == "no such device");
    CHECK(body["details"]["device"] == "gpu:9");
    for (int i = 0; i <= static_cast<int>(ErrorCode::Internal); ++i) {
        const auto code = static_cast<ErrorCode>(i);
        CHECK(parse_code(code_name(code)) == code);
        const int status = http_status(code);
        CHECK((status == 400 || status == 404 || status == 409 || status == 422 || status == 500 || status == 503));
    }
    CHECK_FALSE(parse_code("NOPE").has_value());
}

TEST_CASE("HTTP error mapping") {
    Daemon d;
    ApiClient c(d.url());

    auto r = c.get("/api/models/does-not-exist");
    CHECK(r.status == 404);
    CHECK(r.json()["code"] == "NOT_FOUND");
    CHECK(code_of([&] { raise_api_error(r); }) == ErrorCode::NotFound);

    r = c.get("/api/nothing-here");
    CHECK(r.status == 404);
    CHECK(r.json()["code"] == "NOT_FOUND");

    r = c.post("/api/models", json::object());
    CHECK(r.status == 400);
    CHECK(r.json()["code"] == "INVALID_ARGUMENT");

    r = c.register_model("name: x\n", "weights");
    CHECK(r.status == 400);
    CHECK(r.json()["code"] == "INVALID_MANIFEST");

    r = c.get("/api/models?status=bogus");
    CHECK(r.status == 400);

    const auto id = c.register_model(kToyManifest, testing::tiny_toy_json()).json()["id"].get<std::string>();
    d.platform->wait_for_conversion(id, 30s);

    r = c.post("/api/models/" + id + "/deploy", {{"device", "cpu:0"}, {"backend", "onnx-serve"}});
    CHECK(r.status == 422);
    CHECK(r.json()["code"] == "INCOMPATIBLE_FORMAT");

    r = c.post("/api/models/" + id + "/deploy", {{"device", "tpu:7"}, {"backend", "mockserve"}});
    CHECK(r.status == 422);
    CHECK(r.json()["code"] == "UNKNOWN_DEVICE");

    r = c.post("/api/models/" + id + "/deploy", {{"device", 3}});
    CHECK(r.status == 400);

    r = c.post("/api/models/" + id + "/convert", {{"targets", {"tensorrt"}}});
    CHECK(r.status == 422);
    CHECK(r.json()["code"] == "UNSUPPORTED_CONVERSION");

    r = c.patch("/api/models/" + id, {{"name", "renamed"}});
    CHECK(r.status == 422);
    CHECK(r.json()["code"] == "IMMUTABLE_FIELD");

    r = c.patch("/api/models/" + id, {{"task", "t"}}, {{"If-Match", "1999-01-01T00:00:00.000Z"}});
    CHECK(r.status == 409);
    CHECK(r.json()["code"] == "CONFLICT");

    httplib::Client raw("127.0.0.1", d.port);
    const auto bad = raw.Post("/api/models/" + id + "/profile", "[1", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body)["code"] == "INVALID_ARGUMENT");
}

TEST_CASE("full lifecycle over HTTP with the event stream") {
    Daemon d;
    ApiClient c(d.url());

    std::vector<Event> seen;
    std::mutex seen_mu;
    std::atomic<bool> watching{true};
    std::thread watcher([&] {
        ApiClient events(d.url());
        events.events(std::nullopt, [&](const Event& e) {
            std::lock_guard lock(seen_mu);
            seen.push_back(e);
            return watching.load();
        });
    });

    auto reg = c.register_model(kToyManifest, testing::tiny_toy_json());
    REQUIRE(reg.status == 201);
    const auto id = reg.json()["id"].get<std::string>();
    CHECK(reg.json()["status"] == "registered");

    d.platform->wait_for_conversion(id, 30s);
    auto jobs = c.get("/api/jobs").json();
    REQUIRE(jobs.size() == 2);  // one per variant
    for (const auto& j : jobs) CHECK(wait_for_job(c, j["id"])["state"] == "completed");

    const auto record = c.get("/api/models/" + id).json();
    CHECK(record["status"] == "profiled");
    CHECK(record["variants"].size() == 2);
    const auto results = c.get("/api/models/" + id + "/results").json();
    CHECK(results.size() == 4);  // 2 variants x 2 batch sizes
    for (const auto& r : results) {
        CHECK(r["p50_latency_ms"].get<double>() <= r["p95_latency_ms"].get<double>());
        CHECK(r["p95_latency_ms"].get<double>() <= r["p99_latency_ms"].get<double>());
        CHECK(r["peak_throughput"].get<double>() > 0);
    }
    const auto csv = c.get("/api/models/" + id + "/results?format=csv");
    CHECK(csv.content_type.rfind("text/csv", 0) == 0);
    CHECK(std::count(csv.body.begin(), csv.body.end(), '\n') == 5);

    auto dep = c.post("/api/models/" + id + "/deploy", {{"device", "cpu:0"}, {"backend", "mockserve"}});
    REQUIRE(dep.status == 201);
    const auto inst = dep.json();
    CHECK(inst["state"] == "ready");
    CHECK(c.get("/api/models/" + id).json()["status"] == "serving");

    const auto ep = inst["endpoint"].get<std::string>();
    ServiceClient svc(Endpoint{"127.0.0.1", std::stoi(ep.substr(ep.rfind(':') + 1))}, Protocol::Rest);
    auto pred = svc.predict(make_predict_body(2, 4));
    REQUIRE(pred.has_value());
    CHECK(pred->status == 200);

    CHECK(c.get("/api/instances").json().size() == 1);
    CHECK(c.get("/api/instances/" + inst["id"].get<std::string>()).json()["id"] == inst["id"]);
    // Serving records refuse deletion while the instance lives.
    CHECK(c.del("/api/models/" + id).json()["code"] == "IN_USE");
    CHECK(c.del("/api/instances/" + inst["id"].get<std::string>()).status == 200);
    CHECK(c.get("/api/instances").json().empty());
    // Stopped ones (profiling instances included) remain visible on request.
    CHECK(c.get("/api/instances?all=true").json().size() >= 1);

    CHECK(c.get("/api/devices").json()["devices"][0]["id"] == "cpu:0");
    CHECK(c.get("/api/controller").json().contains("devices"));
    CHECK(c.get("/api/backends").json().size() == 2);
    const auto metrics = c.get("/metrics");
    CHECK(metrics.status == 200);
    CHECK(metrics.body.find("cpu:0") != std::string::npos);

    // Let a snapshot go by, then stop watching.
    std::this_thread::sleep_for(150ms);
    watching = false;
    c.get("/api/health");
    d.platform->events().publish("nudge", json::object());
    watcher.join();

    std::lock_guard lock(seen_mu);
    std::vector<std::string> statuses;
    std::set<std::string> types;
    for (const auto& e : seen) {
        types.insert(e.type);
        if (e.type == "model" && e.data["id"] == id &&
            (statuses.empty() || statuses.back() != e.data["status"].get<std::string>())) {
            statuses.push_back(e.data["status"]);
        }
    }
    CHECK(types.count("snapshot"));
    CHECK(types.count("cell_completed"));
    CHECK(types.count("instance_state"));
    REQUIRE_FALSE(statuses.empty());
    CHECK(statuses.front() == "registered");
    CHECK(statuses.back() == "serving");
    CHECK(std::find(statuses.begin(), statuses.end(), "converted") != statuses.end());
    CHECK(std::find(statuses.begin(), statuses.end(), "profiled") != statuses.end());
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i].id > seen[i - 1].id);
}

TEST_CASE("SSE reconnect with Last-Event-ID replays what was missed") {
    Daemon d;
    for (int i = 0; i < 5; ++i) d.platform->events().publish("marker", {{"i", i}});
    const auto history = d.platform->events().history();
    std::uint64_t third = 0;
    for (const auto& e : history) {
        if (e.type == "marker" && e.data["i"] == 2) third = e.id;
    }
    REQUIRE(third > 0);

    ApiClient c(d.url());
    std::vector<int> markers;
    c.events(third, [&](const Event& e) {
        if (e.type == "marker") markers.push_back(e.data["i"]);
        return markers.size() < 2;
    });
    CHECK(markers == std::vector<int>{3, 4});
}

TEST_CASE("state-changing endpoints are idempotent under retry") {
    Daemon d;
    ApiClient c(d.url());
    const ApiClient::Headers key{{"Idempotency-Key", "reg-1"}};

    const auto first = c.register_model(kToyManifest, testing::tiny_toy_json(), key);
    REQUIRE(first.status == 201);
    const auto again = c.register_model(kToyManifest, testing::tiny_toy_json(), key);
    CHECK(again.status == 201);
    CHECK(again.replayed);
    CHECK(again.body == first.body);
    CHECK(c.get("/api/models").json().size() == 1);

    // Same key, different request.
    const auto other = c.register_model(kToyManifest, "different weights", key);
    CHECK(other.status == 409);
    CHECK(other.json()["code"] == "IDEMPOTENCY_CONFLICT");

    const auto id = first.json()["id"].get<std::string>();
    d.platform->wait_for_conversion(id, 30s);

    const ApiClient::Headers patch_key{{"Idempotency-Key", "patch-1"}};
    const auto p1 = c.patch("/api/models/" + id, {{"dataset", "v2"}}, patch_key);
    CHECK(p1.status == 200);
    const auto p2 = c.patch("/api/models/" + id, {{"dataset", "v2"}}, patch_key);
    CHECK(p2.replayed);
    CHECK(p2.body == p1.body);

    // Errors below 500 are remembered too.
    const ApiClient::Headers bad_key{{"Idempotency-Key", "bad-1"}};
    const auto b1 = c.post("/api/models/" + id + "/deploy", {{"device", "tpu:1"}}, bad_key);
    const auto b2 = c.post("/api/models/" + id + "/deploy", {{"device", "tpu:1"}}, bad_key);
    CHECK(b1.status == 422);
    CHECK(b2.status == 422);
    CHECK(b2.replayed);

    // Concurrent retries: one executes, the rest replay or see the request in flight.
    const ApiClient::Headers del_key{{"Idempotency-Key", "del-1"}};
    std::vector<int> statuses(4);
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&, i] {
            ApiClient own(d.url());
            statuses[i] = own.del("/api/models/" + id, del_key).status;
        });
    }
    for (auto& t : threads) t.join();
    for (int s : statuses) CHECK((s == 200 || s == 409));
    CHECK(std::count(statuses.begin(), statuses.end(), 200) >= 1);
    CHECK(c.get("/api/models/" + id).status == 404);
    CHECK(c.del("/api/models/" + id, del_key).status == 200);  // replay of the success
}

TEST_CASE("concurrent clients") {
    Daemon d;
    std::vector<std::thread> threads;
    std::atomic<int> created{0};
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&, i] {
            ApiClient c(d.url());
            std::string manifest = kToyManifest;
            manifest.replace(manifest.find("name: toy"), 9, "name: toy" + std::to_string(i % 4));
            manifest += "convert: false\n";
            if (c.register_model(manifest, testing::tiny_toy_json()).status == 201) ++created;
            for (int k = 0; k < 10; ++k) CHECK(c.get("/api/models").status == 200);
        });
    }
    for (auto& t : threads) t.join();
    CHECK(created == 8);
    ApiClient c(d.url());
    const auto models = c.get("/api/models").json();
    CHECK(models.size() == 8);
    std::map<std::string, std::set<int>> versions;
    for (const auto& m : models) versions[m["name"]].insert(m["version"].get<int>());
    for (const auto& [name, v] : versions) CHECK(v == std::set<int>{1, 2});
}

TEST_CASE("CLI --json output equals the API body") {
    Daemon d;
    ApiClient c(d.url());
    const auto manifest_path = d.dir / "toy.yaml";
    const auto weights_path = d.dir / "toy.bin";
    std::ofstream(manifest_path) << kToyManifest << "profile: false\n";
    std::ofstream(weights_path) << testing::tiny_toy_json();

    int status = -1;
    const auto reg = json::parse(
        cli(d, "--json register -f " + manifest_path.string() + " -w " + weights_path.string(), &status));
    CHECK(status == 0);
    const auto id = reg["id"].get<std::string>();
    d.platform->wait_for_conversion(id, 30s);

    for (const auto& [args, path] : std::vector<std::pair<std::string, std::string>>{
             {"models list", "/api/models"},
             {"models list --name toy", "/api/models?name=toy"},
             {"models get " + id, "/api/models/" + id},
             {"results " + id, "/api/models/" + id + "/results"},
             {"instances list", "/api/instances"},
             {"instances list --all", "/api/instances?all=true"},
             {"jobs", "/api/jobs"},
             {"placements", "/api/placements"},
             {"backends", "/api/backends"}}) {
        const auto out = cli(d, "--json " + args, &status);
        CHECK_MESSAGE(status == 0, args);
        CHECK_MESSAGE(out == c.get(path).body, args);
    }
    CHECK(cli(d, "results " + id + " --csv") == c.get("/api/models/" + id + "/results?format=csv").body);

    // Human output is a table.
    const auto table = cli(d, "models list");
    CHECK(table.rfind("ID", 0) == 0);
    CHECK(table.find(id) != std::string::npos);

    // Errors exit nonzero with the code name.
    const auto err = cli(d, "models get nope", &status);
    CHECK(status != 0);
    CHECK(err.find("error: NOT_FOUND") != std::string::npos);
    cli(d, "deploy " + id + " --device tpu:3", &status);
    CHECK(status != 0);

    // Mutations through the CLI match a following GET.
    const auto updated = cli(d, "--json models update " + id + " --dataset fresh --metric acc=0.5", &status);
    CHECK(status == 0);
    CHECK(updated == c.get("/api/models/" + id).body);
    CHECK(json::parse(updated)["metrics"]["acc"] == 0.5);

    // Unreachable daemon.
    const auto down = ::popen((std::string(MODELCI_CLI_BIN) + " --url http://127.0.0.1:1 models list 2>&1").c_str(), "r");
    char buf[512] = {};
    const auto n = std::fread(buf, 1, sizeof buf - 1, down);
    CHECK(WEXITSTATUS(::pclose(down)) != 0);
    CHECK(std::string(buf, n).find("error: REQUEST_FAILURE") != std::string::npos);
}

TEST_CASE("register then deploy in two CLI invocations") {
    Daemon d;
    const auto manifest_path = d.dir / "toy.yaml";
    const auto weights_path = d.dir / "toy.bin";
    std::ofstream(manifest_path) << kToyManifest << "profile: false\n";
    std::ofstream(weights_path) << testing::tiny_toy_json();

    int status = -1;
    const auto out =
        cli(d, "register -f " + manifest_path.string() + " -w " + weights_path.string(), &status);
    REQUIRE(status == 0);
    REQUIRE(out.rfind("registered ", 0) == 0);
    const auto id = out.substr(11, out.find(' ', 11) - 11);

    const auto dep = cli(d, "deploy " + id + " --device cpu:0 --backend mockserve --protocol rest", &status);
    CHECK(status == 0);
    CHECK(dep.find("serving ") == 0);
    CHECK(dep.find("http://127.0.0.1:") != std::string::npos);
}

TEST_CASE("automatic placement picks the idle device") {
    Daemon d;
    ApiClient c(d.url());
    std::string manifest = kToyManifest;
    manifest += "profile: false\n";
    const auto id = c.register_model(manifest, testing::tiny_toy_json()).json()["id"].get<std::string>();
    const auto r = c.post("/api/models/" + id + "/deploy", {{"backend", "mockserve"}});
    REQUIRE(r.status == 201);
    CHECK(r.json()["device"] == "cpu:0");
    const auto placements = c.get("/api/placements").json();
    REQUIRE(placements.size() == 1);
    CHECK(placements[0]["state"] == "placed");
    CHECK(placements[0]["instance_id"] == r.json()["id"]);
}

TEST_CASE("jobs survive a daemon restart") {
    auto d = std::make_unique<Daemon>(std::vector<int>{1, 2, 4});
    ApiClient c(d->url());
    const auto id = c.register_model(kToyManifest, testing::tiny_toy_json()).json()["id"].get<std::string>();
    d->platform->wait_for_conversion(id, 30s);
    for (const auto& j : c.get("/api/jobs").json()) wait_for_job(c, j["id"]);

    d->server->stop();
    d->platform->shutdown();
    std::string cut_off;
    {
        // A conversion the crash interrupted.
        registry::Registry reg(std::make_shared<registry::FileStore>(d->config.store_path));
        registry::RegistrationManifest m = registry::parse_manifest(kToyManifest);
        m.name = "interrupted";
        cut_off = reg.register_model(m, testing::tiny_toy_json()).id;
        reg.transition(cut_off, registry::ModelStatus::Converting);
    }
    d->start();
    ApiClient again(d->url());
    const auto jobs = again.get("/api/jobs").json();
    CHECK(jobs.size() == 2);
    for (const auto& j : jobs) {
        CHECK(j["state"] == "completed");
        CHECK(j["completed_cells"].size() == 3);
    }
    CHECK(again.get("/api/models/" + id + "/results").json().size() == 6);

    CHECK(again.get("/api/models/" + cut_off).json()["status"] == "failed");
    const auto retried = again.post("/api/models/" + cut_off + "/convert", json::object());
    CHECK(retried.status == 200);
    CHECK(retried.json()["record"]["status"] == "converted");
}
