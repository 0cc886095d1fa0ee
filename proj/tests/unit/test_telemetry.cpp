// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "exposition_parser.hpp"
#include "modelci/error.hpp"
#include "modelci/telemetry/telemetry.hpp"
#include "modelci/util/fs.hpp"
#include "modelci/util/process.hpp"
#include "test_support.hpp"
#include "toy_graphs.hpp"

using namespace modelci;
using namespace modelci::telemetry;
using namespace std::chrono_literals;

namespace {

std::shared_ptr<SyntheticProvider> synthetic(const std::string& trace,
                                             SyntheticProvider::Mode mode = SyntheticProvider::Mode::Step) {
    return std::make_shared<SyntheticProvider>(SyntheticProvider::parse_trace(trace), mode);
}

const char* kTwoPoint =
    "# t device util used total\n"
    "0 cpu:0 0.1 100 1000\n"
    "0 gpu:0 0.5 7 8\n"
    "50 cpu:0 0.9 200 1000\n"
    "50 gpu:0 0.25 8 8\n";

}  // namespace

TEST_CASE("synthetic trace replays exactly and then holds") {
    auto p = synthetic(kTwoPoint);
    auto s0 = p->sample();
    auto s1 = p->sample();
    CHECK(s0.at("cpu:0") == DeviceStats{0.1, 100, 1000});
    CHECK(s0.at("gpu:0") == DeviceStats{0.5, 7, 8});
    CHECK(s1.at("cpu:0") == DeviceStats{0.9, 200, 1000});
    CHECK(s1.at("gpu:0") == DeviceStats{0.25, 8, 8});
    CHECK(p->sample() == s1);
    CHECK(p->sample() == s1);
}

TEST_CASE("realtime replay follows elapsed time") {
    auto p = synthetic("0 cpu:0 0.1 1 2\n200 cpu:0 0.9 1 2\n", SyntheticProvider::Mode::Realtime);
    CHECK(p->sample().at("cpu:0").utilization == 0.1);
    std::this_thread::sleep_for(50ms);
    CHECK(p->sample().at("cpu:0").utilization == 0.1);
    std::this_thread::sleep_for(200ms);
    CHECK(p->sample().at("cpu:0").utilization == 0.9);
}

TEST_CASE("trace parsing rejects bad input") {
    CHECK_THROWS_AS(SyntheticProvider::parse_trace("# nothing\n\n"), Error);
    try {
        SyntheticProvider::parse_trace("");
        FAIL("expected EmptyTrace");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyTrace);
    }
    for (const char* bad : {"0 cpu:0 1.5 1 2\n", "0 cpu:0 0.5 3 2\n", "x cpu:0 0.5 1 2\n", "0 cpu:0 0.5 1\n",
                            "0 cpu:0 0.5 1 2 extra\n"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(SyntheticProvider::parse_trace(bad), Error);
    }
}

TEST_CASE("host provider reports cpu:0 within invariants") {
    HostProvider host;
    for (int i = 0; i < 3; ++i) {
        const auto devices = host.sample();
        REQUIRE(devices.size() == 1);
        const auto& s = devices.at("cpu:0");
        CHECK(s.utilization >= 0.0);
        CHECK(s.utilization <= 1.0);
        CHECK(s.memory_total > 0);
        CHECK(s.memory_used <= s.memory_total);
    }
}

TEST_CASE("host provider arithmetic on a fixed /proc") {
    testing::TempDir proc;
    auto write_stat = [&](const char* cpu) {
        util::write_file_atomic(proc / "stat", std::string(cpu) + "\ncpu0 1 1 1 1 1 1 1 1\n");
    };
    util::write_file_atomic(proc / "meminfo", "MemTotal:       1000 kB\nMemFree: 10 kB\nMemAvailable:    250 kB\n");
    // user nice system idle iowait irq softirq steal
    write_stat("cpu  100 0 100 700 100 0 0 0");
    HostProvider host(proc.path());
    // The first call takes its baseline from the same file.
    CHECK(host.sample().at("cpu:0").utilization == 0.0);
    // +60 busy (user 30, system 20, steal 10), +40 idle/iowait.
    write_stat("cpu  130 0 120 720 120 0 0 10");
    const auto s = host.sample().at("cpu:0");
    CHECK(s.utilization == doctest::Approx(0.6));
    CHECK(s.memory_total == 1000 * 1024);
    CHECK(s.memory_used == 750 * 1024);

    util::write_file_atomic(proc / "stat", "garbage\n");
    CHECK_THROWS_AS(host.sample(), Error);
}

TEST_CASE("no fabrication: only sampled devices appear") {
    Telemetry t(synthetic("0 gpu:1 0.2 1 2\n"));
    const auto snap = t.sample_devices();
    CHECK(snap.devices.size() == 1);
    CHECK(snap.devices.count("cpu:0") == 0);
    CHECK(t.device_known("gpu:1"));
    CHECK_FALSE(t.device_known("gpu:0"));
    CHECK(t.exposition().find("gpu:0") == std::string::npos);
}

TEST_CASE("provider failure re-serves the last snapshot flagged stale") {
    auto p = synthetic(kTwoPoint);
    Telemetry t(p);
    const auto good = t.sample_devices();
    CHECK_FALSE(good.stale);
    p->set_failing(true);
    const auto stale = t.sample_devices();
    CHECK(stale.stale);
    CHECK(stale.devices == good.devices);
    CHECK(stale.sequence == good.sequence);
    CHECK(t.latest().stale);
    CHECK(t.exposition().find("telemetry_snapshot_stale 1\n") != std::string::npos);
    p->set_failing(false);
    const auto fresh = t.sample_devices();
    CHECK_FALSE(fresh.stale);
    CHECK(fresh.sequence == good.sequence + 1);
}

TEST_CASE("subscription at 100 ms yields 8 to 12 snapshots per second") {
    Telemetry t(synthetic(kTwoPoint), {.interval = 1000ms});
    auto sub = t.subscribe(100ms);
    const auto deadline = std::chrono::steady_clock::now() + 1000ms;
    int n = 0;
    while (true) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left <= 0ms) break;
        if (sub->next(left)) ++n;
    }
    CHECK(n >= 8);
    CHECK(n <= 12);
    CHECK_THROWS_AS(t.subscribe(5ms), Error);
}

TEST_CASE("slow consumers lose the oldest snapshots, never the newest") {
    Telemetry t(synthetic("0 cpu:0 0.1 1 2\n"), {.interval = 1000ms, .subscriber_capacity = 3});
    auto sub = t.subscribe(10ms);
    std::this_thread::sleep_for(300ms);
    std::vector<std::uint64_t> seqs;
    while (auto s = sub->next(0ms)) seqs.push_back(s->sequence);
    REQUIRE(seqs.size() == 3);
    CHECK(sub->dropped() > 0);
    CHECK(seqs[0] < seqs[1]);
    CHECK(seqs[1] < seqs[2]);
    // The buffer holds the most recent deliveries.
    auto after = sub->next(200ms);
    REQUIRE(after);
    CHECK(after->sequence > seqs[2]);
    CHECK(t.latest().sequence >= after->sequence);
}

TEST_CASE("subscribers share the underlying samples") {
    Telemetry t(synthetic(kTwoPoint), {.interval = 1000ms});
    auto a = t.subscribe(50ms);
    auto b = t.subscribe(50ms);
    std::this_thread::sleep_for(320ms);
    std::vector<std::uint64_t> sa, sb;
    while (auto s = a->next(0ms)) sa.push_back(s->sequence);
    while (auto s = b->next(0ms)) sb.push_back(s->sequence);
    CHECK(sa.size() >= 4);
    CHECK(sa == sb);

    // A closed subscription does not stall the other one.
    a->close();
    CHECK(b->next(500ms).has_value());
}

TEST_CASE("exposition is well-formed and mirrors the latest snapshot") {
    auto p = synthetic("0 cpu:0 0.1234567890123 100 1000\n0 gpu:\"x\\ 0.3 5 6\n");
    Telemetry t(p);
    const auto snap = t.sample_devices();
    const auto doc = testing::parse_exposition(t.exposition());
    CHECK(doc.types.at("device_utilization") == "gauge");
    CHECK(doc.types.at("instance_network_receive_bytes_total") == "counter");
    for (const auto& [id, s] : snap.devices) {
        CAPTURE(id);
        const auto* util = doc.find("device_utilization", "device", id);
        REQUIRE(util);
        CHECK(util->value == s.utilization);  // exact, not approximate
        CHECK(doc.find("device_memory_used_bytes", "device", id)->value == static_cast<double>(s.memory_used));
        CHECK(doc.find("device_memory_total_bytes", "device", id)->value == static_cast<double>(s.memory_total));
    }
    CHECK(t.exposition().find("device_utilization{device=\"cpu:0\"} 0.1234567890123\n") != std::string::npos);
}

TEST_CASE("the exposition parser rejects malformed documents") {
    for (const char* bad : {"metric 1", "metric{a=\"1} 2\n", "1metric 2\n", "metric{a=\"x\"}\n", "metric abc\n",
                            "# TYPE m gauge\nm 1\n# TYPE m gauge\n"}) {
        CAPTURE(bad);
        CHECK_THROWS(testing::parse_exposition(bad));
    }
}

TEST_CASE("instance stats for a loaded mockserve") {
    testing::TempDir dir;
    util::write_file_atomic(dir / "model.json", testing::tiny_toy_json());
    util::SpawnOptions opts;
    opts.argv = {MODELCI_MOCKSERVE_BIN, "--model", (dir / "model.json").string()};
    opts.capture_stdout = true;
    auto proc = util::Subprocess::spawn(opts);
    const auto line = proc.read_line(5000ms);
    REQUIRE(line);
    const int port = std::stoi(line->substr(6));

    Telemetry t(synthetic(kTwoPoint));
    t.track_instance("inst-1", proc.pid());

    std::atomic<bool> stop{false};
    std::thread load([&] {
        httplib::Client c("127.0.0.1", port);
        c.set_keep_alive(true);
        c.set_tcp_nodelay(true);
        std::string body = R"({"inputs":[)";
        for (int i = 0; i < 256; ++i) body += std::string(i ? "," : "") + "[1,2,3,4]";
        body += "]}";
        while (!stop) c.Post("/predict", body, "application/json");
    });

    InstanceStats prev;
    double max_cpu = 0;
    for (int i = 0; i < 10; ++i) {
        std::this_thread::sleep_for(60ms);
        const auto s = t.sample_instance("inst-1");
        CHECK(s.memory_bytes > 0);
        CHECK(s.cpu_fraction >= 0.0);
        CHECK(s.cpu_fraction <= 1.0);
        if (i > 0) {
            CHECK(s.net_rx_bytes >= prev.net_rx_bytes);
            CHECK(s.net_tx_bytes >= prev.net_tx_bytes);
        }
        max_cpu = std::max(max_cpu, s.cpu_fraction);
        prev = s;
    }
    stop = true;
    load.join();
    CHECK(max_cpu > 0.0);
    CHECK(prev.net_rx_bytes > 0);

    const auto doc = testing::parse_exposition(t.exposition());
    CHECK(doc.find("instance_memory_bytes", "instance", "inst-1"));

    proc.stop(1000ms);
    CHECK_THROWS_AS(t.sample_instance("inst-1"), Error);
    t.untrack_instance("inst-1");
    try {
        t.sample_instance("inst-1");
        FAIL("expected NotFound");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotFound);
    }
}
