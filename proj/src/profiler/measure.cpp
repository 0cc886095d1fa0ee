// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/profiler/measure.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include "modelci/client.hpp"
#include "modelci/error.hpp"

namespace modelci::profiler {

using Clock = std::chrono::steady_clock;

namespace {

struct Completion {
    std::int64_t at_us;
    double latency_ms;
    int client;
};

}  // namespace

LatencySamples measure_cell(const Endpoint& endpoint, Protocol protocol, const MeasureOptions& o) {
    if (o.requests < 1 || o.concurrency < 1 || o.batch_size < 1) {
        throw Error(ErrorCode::InvalidArgument, "measure_cell needs requests, concurrency and batch size >= 1");
    }
    const std::string body = make_predict_body(o.batch_size, std::max(1, o.input_dim));
    const auto failure_budget = static_cast<std::int64_t>(std::floor(o.max_failure_fraction * o.requests));

    std::vector<std::unique_ptr<ServiceClient>> clients;
    for (int c = 0; c < o.concurrency; ++c) {
        clients.push_back(std::make_unique<ServiceClient>(endpoint, protocol, o.connect_timeout, o.request_timeout));
    }
    std::atomic<std::int64_t> failed{0};
    std::atomic<bool> aborted{false};
    auto record_failure = [&] {
        if (failed.fetch_add(1) + 1 > failure_budget) aborted = true;
    };

    // Warmup spreads over the clients so each connection is established.
    for (int i = 0; i < o.warmup_requests && !aborted; ++i) {
        auto res = clients[i % o.concurrency]->predict(body);
        if (!res || res->status != 200) record_failure();
    }
    if (aborted) {
        throw Error(ErrorCode::RequestFailure, "warmup failed against " + endpoint.str(),
                    {{"failed_requests", std::to_string(failed.load())}});
    }
    failed = 0;

    // Tickets hand out the remaining successful requests to whichever
    // client is free; a failure returns its ticket.
    std::atomic<int> tickets{o.requests};
    std::mutex mu;
    std::vector<Completion> completions;
    completions.reserve(o.requests);
    const auto t0 = Clock::now();

    auto client_loop = [&](int id) {
        ServiceClient& client = *clients[id];
        while (!aborted) {
            if (tickets.fetch_sub(1) <= 0) break;
            const auto start = Clock::now();
            auto res = client.predict(body);
            const auto end = Clock::now();
            if (!res || res->status != 200) {
                tickets.fetch_add(1);
                record_failure();
                continue;
            }
            const Completion c{std::chrono::duration_cast<std::chrono::microseconds>(end - t0).count(),
                               std::chrono::duration<double, std::milli>(end - start).count(), id};
            std::lock_guard lock(mu);
            completions.push_back(c);
        }
    };
    std::vector<std::thread> threads;
    for (int c = 1; c < o.concurrency; ++c) threads.emplace_back(client_loop, c);
    client_loop(0);
    for (auto& t : threads) t.join();

    if (aborted) {
        throw Error(ErrorCode::RequestFailure,
                    std::to_string(failed.load()) + " failed requests against " + endpoint.str() +
                        " exceed the budget of " + std::to_string(failure_budget),
                    {{"failed_requests", std::to_string(failed.load())}});
    }

    std::stable_sort(completions.begin(), completions.end(),
                     [](const Completion& a, const Completion& b) { return a.at_us < b.at_us; });
    LatencySamples out;
    out.failed_requests = failed;
    for (const auto& c : completions) {
        out.latencies_ms.push_back(c.latency_ms);
        out.completions_us.push_back(c.at_us);
        out.client_ids.push_back(c.client);
    }
    return out;
}

}  // namespace modelci::profiler
