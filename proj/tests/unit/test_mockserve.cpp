// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include <doctest.h>
#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "modelci/error.hpp"
#include "modelci/mockserve/server.hpp"
#include "modelci/util/fs.hpp"
#include "modelci/util/process.hpp"
#include "test_support.hpp"
#include "toy_graphs.hpp"

using namespace modelci;
using namespace modelci::mockserve;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

MockServeOptions options(double base, double per_sample = 0, Protocol protocol = Protocol::Rest) {
    MockServeOptions o;
    o.model_bytes = testing::tiny_toy_json();
    o.latency = {base, per_sample, 0};
    o.protocol = protocol;
    return o;
}

std::string batch_body(int b) {
    json inputs = json::array();
    for (int i = 0; i < b; ++i) inputs.push_back({1.0 * i, 2.0, 3.0, 4.0});
    return json{{"inputs", inputs}}.dump();
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_CASE("service time follows the latency model and replays per seed") {
    ServiceTimer exact({10, 1, 0}, 7);
    CHECK(exact.service_time_ms(4) == doctest::Approx(14.0));

    ServiceTimer a({5, 0.5, 3}, 42), b({5, 0.5, 3}, 42), c({5, 0.5, 3}, 43);
    bool differs = false;
    for (int i = 0; i < 200; ++i) {
        const double ta = a.service_time_ms(2);
        CHECK(ta == b.service_time_ms(2));
        CHECK(ta >= 6.0);
        CHECK(ta <= 9.0);
        differs |= ta != c.service_time_ms(2);
    }
    CHECK(differs);
    CHECK_THROWS_AS(LatencyModel({-1, 0, 0}).validate(), Error);
}

TEST_CASE("fault script") {
    const auto s = FaultScript::parse("# comment\n\n5000 health-fail\n8000 health-ok\n100 predict-fail\n");
    CHECK(s.state_at(0).health_ok);
    CHECK(s.state_at(0).predict_ok);
    CHECK_FALSE(s.state_at(100).predict_ok);
    CHECK(s.state_at(4999).health_ok);
    CHECK_FALSE(s.state_at(5000).health_ok);
    CHECK(s.state_at(8000).health_ok);
    CHECK_THROWS_AS(FaultScript::parse("10 explode\n"), Error);
    CHECK_THROWS_AS(FaultScript::parse("-5 health-fail\n"), Error);
}

TEST_CASE("predict handler validates the batch") {
    MockServer server(options(0));
    CHECK(server.predict(R"({"inputs":[]})").first == FrameStatus::BadRequest);
    CHECK(server.predict(R"({"inputs":[[1,2,3]]})").first == FrameStatus::BadRequest);
    CHECK(server.predict(R"({"inputs":[[1,2,3,"x"]]})").first == FrameStatus::BadRequest);
    CHECK(server.predict("not json").first == FrameStatus::BadRequest);

    const auto [status, body] = server.predict(R"({"inputs":[[1,2,3,4],[0,0,0,0]]})");
    REQUIRE(status == FrameStatus::Ok);
    const auto doc = json::parse(body);
    CHECK(doc["batch_size"] == 2);
    const auto graph = converter::decode_toy_json(testing::tiny_toy_json());
    CHECK(doc["outputs"][0].get<std::vector<double>>() == graph.forward({1, 2, 3, 4}));
    CHECK(doc["outputs"][1].get<std::vector<double>>() == graph.forward({0, 0, 0, 0}));
}

TEST_CASE("undecodable model is rejected") {
    auto o = options(0);
    o.model_bytes = "garbage";
    CHECK_THROWS_AS(MockServer{o}, Error);
}

TEST_CASE("REST predict latency matches base + per_sample * b") {
    MockServer server(options(10, 0));
    const int port = server.start();
    httplib::Client client("127.0.0.1", port);
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);
    REQUIRE(client.Post("/predict", batch_body(1), "application/json"));  // warm the connection

    for (int i = 0; i < 5; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto res = client.Post("/predict", batch_body(4), "application/json");
        const double ms = ms_since(t0);
        REQUIRE(res);
        CHECK(res->status == 200);
        CHECK(ms >= 10.0);
        CHECK(ms <= 14.0);
    }
    auto bad = client.Post("/predict", R"({"inputs":[]})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
}

TEST_CASE("health follows ready delay and scripted faults") {
    auto o = options(0);
    o.ready_delay = 100ms;
    o.faults = FaultScript::parse("300 health-fail\n");
    MockServer server(std::move(o));
    const int port = server.start();
    httplib::Client client("127.0.0.1", port);
    CHECK(client.Get("/health")->status == 503);
    std::this_thread::sleep_for(150ms);
    CHECK(client.Get("/health")->status == 200);
    std::this_thread::sleep_for(200ms);
    CHECK(client.Get("/health")->status == 503);
}

TEST_CASE("framed protocol carries the same semantics") {
    MockServer server(options(10, 1, Protocol::GrpcStyle));
    const int port = server.start();
    FramedClient client("127.0.0.1", port, 1000ms, 5000ms);
    auto health = client.call(FrameMethod::Health, "");
    REQUIRE(health);
    CHECK(health->status == FrameStatus::Ok);

    for (int b : {1, 4}) {
        const auto t0 = std::chrono::steady_clock::now();
        auto reply = client.call(FrameMethod::Predict, batch_body(b));
        const double ms = ms_since(t0);
        REQUIRE(reply);
        CHECK(reply->status == FrameStatus::Ok);
        CHECK(json::parse(reply->body)["batch_size"] == b);
        CHECK(ms >= 10.0 + b);
        CHECK(ms <= 10.0 + b + 4.0);
    }
    auto bad = client.call(FrameMethod::Predict, R"({"inputs":[]})");
    REQUIRE(bad);
    CHECK(bad->status == FrameStatus::BadRequest);
}

TEST_CASE("connections are served concurrently") {
    MockServer server(options(50, 0, Protocol::GrpcStyle));
    const int port = server.start();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::thread> clients;
    std::atomic<int> ok{0};
    for (int i = 0; i < 4; ++i) {
        clients.emplace_back([&] {
            FramedClient c("127.0.0.1", port, 1000ms, 5000ms);
            auto r = c.call(FrameMethod::Predict, batch_body(1));
            if (r && r->status == FrameStatus::Ok) ++ok;
        });
    }
    for (auto& t : clients) t.join();
    CHECK(ok == 4);
    CHECK(ms_since(t0) < 150.0);  // serialised handling would need >= 200 ms
}

TEST_CASE("framed client reports a dead endpoint") {
    int port;
    {
        MockServer server(options(0, 0, Protocol::GrpcStyle));
        port = server.start();
    }
    FramedClient client("127.0.0.1", port, 200ms, 200ms);
    CHECK_FALSE(client.call(FrameMethod::Health, ""));
}

TEST_CASE("binary prints the handshake and rejects bad models") {
    testing::TempDir dir;
    util::write_file_atomic(dir / "model.json", testing::tiny_toy_json());
    util::write_file_atomic(dir / "bad.bin", "TOYB\x01\x02");

    util::SpawnOptions good;
    good.argv = {MODELCI_MOCKSERVE_BIN, "--model", (dir / "model.json").string(), "--base-ms", "1"};
    good.capture_stdout = true;
    auto proc = util::Subprocess::spawn(good);
    const auto line = proc.read_line(5000ms);
    REQUIRE(line);
    REQUIRE(line->rfind("READY ", 0) == 0);
    const int port = std::stoi(line->substr(6));
    httplib::Client client("127.0.0.1", port);
    auto res = client.Post("/predict", batch_body(2), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    proc.stop(1000ms);
    CHECK_FALSE(proc.alive());

    util::SpawnOptions bad;
    bad.argv = {MODELCI_MOCKSERVE_BIN, "--model", (dir / "bad.bin").string()};
    CHECK(util::run_command(bad, 5000ms).exit_status != 0);
}
