// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include <httplib.h>

namespace modelci::util {

// Runs each task on a fresh thread. Finished threads are joined lazily so a
// long-lived server does not accumulate them.
class ThreadPerTask final : public httplib::TaskQueue {
public:
    ~ThreadPerTask() override { shutdown(); }

    bool enqueue(std::function<void()> fn) override {
        std::lock_guard lock(mu_);
        if (closed_) return false;
        reap_locked();
        auto done = std::make_shared<std::atomic<bool>>(false);
        threads_.push_back({std::thread([fn = std::move(fn), done] {
                                fn();
                                done->store(true);
                            }),
                            done});
        return true;
    }

    void shutdown() override {
        std::list<Entry> threads;
        {
            std::lock_guard lock(mu_);
            closed_ = true;
            threads.swap(threads_);
        }
        for (auto& e : threads) {
            if (e.thread.joinable()) e.thread.join();
        }
    }

private:
    struct Entry {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };

    void reap_locked() {
        for (auto it = threads_.begin(); it != threads_.end();) {
            if (it->done->load()) {
                it->thread.join();
                it = threads_.erase(it);
            } else {
                ++it;
            }
        }
    }

    std::mutex mu_;
    std::list<Entry> threads_;
    bool closed_ = false;
};

}  // namespace modelci::util
