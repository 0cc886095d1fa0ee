// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#pragma once

// A second, deliberately naive model of the scheduling rule plus a random
// trace driver that runs it next to the real Scheduler. The model keeps full
// sample histories and picks the start assignment by enumerating every
// device-to-job matching, so it shares no structure with the greedy loop.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "modelci/controller/scheduler.hpp"

namespace modelci::testing {

struct OracleAction {
    std::string kind;  // start_cell | pause_job | resume_job
    std::string job;
    std::string device;
    std::string cell;  // start_cell only

    bool operator==(const OracleAction&) const = default;
};

inline std::vector<OracleAction> as_oracle_actions(const std::vector<controller::SchedulingAction>& actions) {
    std::vector<OracleAction> out;
    for (const auto& a : actions) {
        if (a.kind == controller::ActionKind::PlaceInstance) continue;
        out.push_back({std::string(controller::to_string(a.kind)), a.ref, a.device, a.cell ? a.cell->str() : ""});
    }
    return out;
}

class SchedulerOracle {
public:
    SchedulerOracle(double tau, int k) : tau_(tau), k_(k) {}

    struct Job {
        std::string id;
        std::int64_t seq = 0;
        std::vector<profiler::CellKey> remaining;
        bool paused = false;
        bool running = false;  // started and not paused
        std::string active;    // device of the running cell, empty if none
        std::string last;      // device of the previous cell
    };

    void snapshot(const std::map<std::string, double>& utils, bool stale_flag) {
        if (stale_flag) {
            for (auto& [_, d] : devices_) d.stale = true;
            return;
        }
        for (auto& [id, d] : devices_) d.stale = utils.count(id) == 0;
        for (const auto& [id, u] : utils) {
            auto& d = devices_[id];
            d.stale = false;
            d.history.push_back({u, running_on(id) ? d.self : 0.0});
        }
    }

    void load(const std::string& device, double f) {
        if (running_on(device)) devices_[device].self = std::max(0.0, f);
    }

    void submit(const std::string& id, std::int64_t seq, std::vector<profiler::CellKey> cells) {
        if (cells.empty()) return;
        Job j;
        j.id = id;
        j.seq = seq;
        j.remaining = std::move(cells);
        jobs_.push_back(std::move(j));
    }

    void finish(const std::string& id, const profiler::CellKey& cell) {
        for (std::size_t i = 0; i < jobs_.size(); ++i) {
            auto& j = jobs_[i];
            if (j.id != id) continue;
            if (j.active == cell.device) devices_[cell.device].self = 0;
            j.active.clear();
            j.last = cell.device;
            j.remaining.erase(std::remove(j.remaining.begin(), j.remaining.end(), cell), j.remaining.end());
            if (j.remaining.empty()) jobs_.erase(jobs_.begin() + static_cast<std::ptrdiff_t>(i));
            return;
        }
    }

    // Last k samples of a device, oldest first.
    std::vector<std::pair<double, double>> window(const std::string& device) const {
        auto it = devices_.find(device);
        if (it == devices_.end()) return {};
        const auto& h = it->second.history;
        const std::size_t n = std::min<std::size_t>(h.size(), static_cast<std::size_t>(k_));
        return {h.end() - static_cast<std::ptrdiff_t>(n), h.end()};
    }

    bool stale(const std::string& device) const {
        auto it = devices_.find(device);
        return it == devices_.end() || it->second.stale;
    }

    bool running_on(const std::string& device) const {
        for (const auto& j : jobs_) {
            if (j.active == device) return true;
        }
        return false;
    }

    bool idle(const std::string& device) const {
        if (stale(device) || running_on(device)) return false;
        const auto w = window(device);
        if (static_cast<int>(w.size()) < k_) return false;
        for (const auto& [u, self] : w) {
            if (!(u - self < tau_)) return false;
        }
        return true;
    }

    bool busy(const std::string& device) const {
        if (stale(device)) return false;
        const auto w = window(device);
        if (static_cast<int>(w.size()) < k_) return false;
        for (const auto& [u, self] : w) {
            if (!(u - self > tau_)) return false;
        }
        return true;
    }

    std::vector<OracleAction> tick() {
        std::vector<OracleAction> out;
        auto order = fifo();
        std::set<std::string> paused_now;
        for (auto* j : order) {
            if (!j->running) continue;
            const std::string where = !j->active.empty() ? j->active : j->last;
            if (where.empty() || !busy(where)) continue;
            j->running = false;
            j->paused = true;
            paused_now.insert(j->id);
            out.push_back({"pause_job", j->id, where, ""});
        }

        std::vector<std::string> free_devices;
        for (const auto& [id, _] : devices_) {
            if (idle(id)) free_devices.push_back(id);
        }
        std::vector<Job*> candidates;
        for (auto* j : order) {
            if (j->active.empty() && !paused_now.count(j->id)) candidates.push_back(j);
        }

        // Every matching; keep the one whose per-device job sequence numbers,
        // read in device order with "nothing" as +inf, are smallest.
        constexpr auto kNone = std::numeric_limits<std::int64_t>::max();
        std::vector<std::int64_t> best_key;
        std::vector<Job*> best, current(free_devices.size(), nullptr);
        std::vector<bool> used(candidates.size(), false);
        auto rec = [&](auto&& self, std::size_t di) -> void {
            if (di == free_devices.size()) {
                std::vector<std::int64_t> key;
                for (auto* j : current) key.push_back(j ? j->seq : kNone);
                if (best_key.empty() || key < best_key) {
                    best_key = key;
                    best = current;
                }
                return;
            }
            current[di] = nullptr;
            self(self, di + 1);
            for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
                if (used[ci] || !has_cell_on(*candidates[ci], free_devices[di])) continue;
                used[ci] = true;
                current[di] = candidates[ci];
                self(self, di + 1);
                current[di] = nullptr;
                used[ci] = false;
            }
        };
        rec(rec, 0);

        for (std::size_t di = 0; di < free_devices.size(); ++di) {
            Job* j = best.empty() ? nullptr : best[di];
            if (!j) continue;
            const auto& dev = free_devices[di];
            if (j->paused) out.push_back({"resume_job", j->id, dev, ""});
            profiler::CellKey first;
            for (const auto& c : j->remaining) {
                if (c.device == dev) {
                    first = c;
                    break;
                }
            }
            out.push_back({"start_cell", j->id, dev, first.str()});
            j->paused = false;
            j->running = true;
            j->active = dev;
            devices_[dev].self = 0;
        }
        return out;
    }

    const std::vector<Job>& jobs() const { return jobs_; }

    const Job* job(const std::string& id) const {
        for (const auto& j : jobs_) {
            if (j.id == id) return &j;
        }
        return nullptr;
    }

private:
    struct Device {
        std::vector<std::pair<double, double>> history;  // (utilization, self load)
        bool stale = true;
        double self = 0;
    };

    static bool has_cell_on(const Job& j, const std::string& dev) {
        for (const auto& c : j.remaining) {
            if (c.device == dev) return true;
        }
        return false;
    }

    std::vector<Job*> fifo() {
        std::vector<Job*> out;
        for (auto& j : jobs_) out.push_back(&j);
        std::sort(out.begin(), out.end(), [](const Job* a, const Job* b) {
            return a->seq != b->seq ? a->seq < b->seq : a->id < b->id;
        });
        return out;
    }

    double tau_;
    int k_;
    std::map<std::string, Device> devices_;
    std::vector<Job> jobs_;
};

struct TraceReport {
    int traces = 0;
    int ticks = 0;
    int starts = 0;
    int pauses = 0;
    int mismatches = 0;        // scheduler actions differ from the oracle
    int unsafe_starts = 0;     // start_cell on a device that was not idle
    int unprotected = 0;       // running job on a busy device left unpaused
    int fifo_violations = 0;   // an older eligible job skipped for a newer one
    std::string first_problem;
};

// Runs `traces` random traces of `steps` events each through a Scheduler and
// the oracle, checking every tick.
inline TraceReport run_random_traces(std::uint64_t seed, int traces, int steps, double tau, int k) {
    TraceReport report;
    std::mt19937_64 rng(seed);
    const std::vector<std::string> all_devices = {"cpu:0", "cpu:1", "gpu:0"};
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };
    auto note = [&](const std::string& what) {
        if (report.first_problem.empty()) report.first_problem = what;
    };

    for (int t = 0; t < traces; ++t) {
        ++report.traces;
        controller::Scheduler sched({tau, k});
        SchedulerOracle oracle(tau, k);
        std::map<std::string, bool> regime_busy;
        for (const auto& d : all_devices) regime_busy[d] = chance(0.5);
        int next_job = 0;
        std::vector<std::pair<std::string, profiler::CellKey>> active;

        for (int step = 0; step < steps; ++step) {
            const double r = uniform(0, 1);
            if (r < 0.12 && oracle.jobs().size() < 4) {
                profiler::SweepSpec sweep;
                sweep.devices.clear();
                for (const auto& d : all_devices) {
                    if (chance(0.5)) sweep.devices.push_back(d);
                }
                if (sweep.devices.empty()) sweep.devices.push_back(all_devices[rng() % all_devices.size()]);
                sweep.backends = {"mockserve"};
                sweep.batch_sizes.clear();
                const int nb = 1 + static_cast<int>(rng() % 3);
                for (int b = 0; b < nb; ++b) sweep.batch_sizes.push_back(1 << b);
                const auto cells = profiler::enumerate_cells(sweep);
                const std::string id = "job-" + std::to_string(next_job);
                const std::int64_t seq = ++next_job;
                sched.submit({id, seq, cells, false});
                oracle.submit(id, seq, cells);
            } else if (r < 0.35 && !active.empty()) {
                const auto i = rng() % active.size();
                const auto [job, cell] = active[i];
                active.erase(active.begin() + static_cast<std::ptrdiff_t>(i));
                sched.on_cell_finished(job, cell);
                oracle.finish(job, cell);
            } else if (r < 0.45 && !active.empty()) {
                const auto& dev = active[rng() % active.size()].second.device;
                const double f = uniform(0, 0.5);
                sched.on_instance_load(dev, f);
                oracle.load(dev, f);
            } else {
                telemetry::DeviceSnapshot snap;
                const bool stale_flag = chance(0.03);
                snap.stale = stale_flag;
                std::map<std::string, double> utils;
                for (const auto& d : all_devices) {
                    if (chance(0.15)) regime_busy[d] = !regime_busy[d];
                    if (chance(0.05)) continue;  // device missing from this sample
                    double u = regime_busy[d] ? uniform(0.41, 1.0) : uniform(0.0, 0.39);
                    if (chance(0.05)) u = tau;  // exactly on the threshold
                    utils[d] = u;
                    snap.devices[d] = {u, 0, 0};
                }
                sched.on_snapshot(snap);
                oracle.snapshot(utils, stale_flag);

                // Independent pre-tick facts.
                std::map<std::string, bool> idle_before, busy_before;
                for (const auto& d : all_devices) {
                    idle_before[d] = oracle.idle(d);
                    busy_before[d] = oracle.busy(d);
                }
                std::vector<const SchedulerOracle::Job*> running_before;
                std::map<std::string, std::string> where_before;
                for (const auto& j : oracle.jobs()) {
                    if (j.running) {
                        running_before.push_back(&j);
                        where_before[j.id] = !j.active.empty() ? j.active : j.last;
                    }
                }
                std::vector<std::string> running_ids;
                for (const auto* j : running_before) running_ids.push_back(j->id);

                const auto got = sched.tick();
                const auto want = oracle.tick();
                ++report.ticks;
                const auto got_plain = as_oracle_actions(got);
                if (got_plain != want) {
                    ++report.mismatches;
                    note("trace " + std::to_string(t) + " step " + std::to_string(step) + ": scheduler and oracle disagree");
                }
                std::set<std::string> paused_ids;
                for (const auto& a : got) {
                    if (a.kind == controller::ActionKind::StartCell) {
                        ++report.starts;
                        active.emplace_back(a.ref, *a.cell);
                        if (!idle_before[a.device]) {
                            ++report.unsafe_starts;
                            note("start_cell on non-idle " + a.device);
                        }
                    } else if (a.kind == controller::ActionKind::PauseJob) {
                        ++report.pauses;
                        paused_ids.insert(a.ref);
                    }
                }
                for (const auto& id : running_ids) {
                    const auto& where = where_before[id];
                    if (!where.empty() && busy_before[where] && !paused_ids.count(id)) {
                        ++report.unprotected;
                        note("job " + id + " left running on busy " + where);
                    }
                }
                // FIFO: each started job must be the oldest waiting one with a
                // cell on that device, among jobs not started earlier this tick.
                std::set<std::string> taken;
                for (const auto& a : got) {
                    if (a.kind != controller::ActionKind::StartCell) continue;
                    const auto* started = oracle.job(a.ref);
                    for (const auto& j : oracle.jobs()) {
                        if (&j == started || taken.count(j.id) || paused_ids.count(j.id)) continue;
                        if (!j.active.empty()) continue;
                        bool has = false;
                        for (const auto& c : j.remaining) has = has || c.device == a.device;
                        if (has && started && j.seq < started->seq) {
                            ++report.fifo_violations;
                            note("FIFO violated on " + a.device);
                        }
                    }
                    taken.insert(a.ref);
                }
            }
        }
    }
    return report;
}

}  // namespace modelci::testing
