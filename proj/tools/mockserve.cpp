// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

// modelci-mockserve: synthetic serving backend for a toy model.
// Prints `READY <port>` on stdout once the socket is bound.

#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "modelci/error.hpp"
#include "modelci/mockserve/server.hpp"
#include "modelci/util/fs.hpp"

using namespace modelci;

int main(int argc, char** argv) {
    CLI::App app{"Synthetic model serving backend"};
    std::string model_path;
    std::string fault_path;
    std::string protocol = "rest";
    mockserve::MockServeOptions opts;
    long ready_delay_ms = 0;
    app.add_option("--model", model_path, "toy-json or toy-binary model file")->required();
    app.add_option("--base-ms", opts.latency.base_ms)->default_val(0);
    app.add_option("--per-sample-ms", opts.latency.per_sample_ms)->default_val(0);
    app.add_option("--jitter-ms", opts.latency.jitter_ms)->default_val(0);
    app.add_option("--seed", opts.seed)->default_val(0);
    app.add_option("--fault-script", fault_path);
    app.add_option("--protocol", protocol)->default_val("rest");
    app.add_option("--host", opts.host)->default_val("127.0.0.1");
    app.add_option("--port", opts.port)->default_val(0);
    app.add_option("--ready-delay-ms", ready_delay_ms)->default_val(0);
    CLI11_PARSE(app, argc, argv);

    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGTERM);
    sigaddset(&stop_signals, SIGINT);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    std::unique_ptr<mockserve::MockServer> server;
    try {
        opts.model_bytes = util::read_file(model_path);
        if (!fault_path.empty()) opts.faults = mockserve::FaultScript::parse(util::read_file(fault_path));
        opts.protocol = parse_protocol(protocol);
        opts.ready_delay = std::chrono::milliseconds(ready_delay_ms);
        opts.latency.validate();
        server = std::make_unique<mockserve::MockServer>(std::move(opts));
        const int port = server->start();
        std::cout << "READY " << port << std::endl;
    } catch (const Error& e) {
        std::cerr << "modelci-mockserve: " << code_name(e.code()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "modelci-mockserve: " << e.what() << "\n";
        return 2;
    }

    int sig = 0;
    sigwait(&stop_signals, &sig);
    // Nothing to flush; skip joining connection threads.
    std::fflush(stdout);
    std::_Exit(0);
}
