// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

#include "modelci/telemetry/telemetry.hpp"

#include <unistd.h>

#include <algorithm>
#include <charconv>

#include <json.hpp>

#include "modelci/error.hpp"

namespace modelci::telemetry {

using json = nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

void to_json(json& j, const DeviceStats& s) {
    j = json{{"utilization", s.utilization}, {"memory_used", s.memory_used}, {"memory_total", s.memory_total}};
}

void to_json(json& j, const DeviceSnapshot& s) {
    json devices = json::object();
    for (const auto& [id, stats] : s.devices) devices[id] = stats;
    j = json{{"timestamp", util::format_timestamp(s.timestamp)}, {"devices", devices}, {"stale", s.stale}};
}

void to_json(json& j, const InstanceStats& s) {
    j = json{{"instance_id", s.instance_id},       {"timestamp", util::format_timestamp(s.timestamp)},
             {"cpu_fraction", s.cpu_fraction},     {"memory_bytes", s.memory_bytes},
             {"net_rx_bytes", s.net_rx_bytes},     {"net_tx_bytes", s.net_tx_bytes}};
}

Subscription::Subscription(std::chrono::milliseconds interval, std::size_t capacity)
    : interval_(interval), capacity_(std::max<std::size_t>(capacity, 1)), next_due_(SteadyClock::now() + interval) {}

void Subscription::push(const DeviceSnapshot& snapshot) {
    {
        std::lock_guard lock(mu_);
        if (closed_) return;
        if (queue_.size() >= capacity_) {
            queue_.pop_front();
            ++dropped_;
        }
        queue_.push_back(snapshot);
    }
    cv_.notify_one();
}

std::optional<DeviceSnapshot> Subscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; }) || queue_.empty()) {
        return std::nullopt;
    }
    DeviceSnapshot s = std::move(queue_.front());
    queue_.pop_front();
    return s;
}

std::size_t Subscription::dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

void Subscription::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool Subscription::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

Telemetry::Telemetry(std::shared_ptr<DeviceProvider> provider, TelemetryOptions options,
                     std::filesystem::path proc_root)
    : provider_(std::move(provider)), options_(options), reader_(std::move(proc_root)) {
    if (options_.interval < std::chrono::milliseconds(10)) {
        throw Error(ErrorCode::InvalidArgument, "telemetry interval must be >= 10 ms");
    }
}

Telemetry::~Telemetry() { stop(); }

void Telemetry::start() {
    if (sampler_.joinable()) return;
    sampler_ = std::jthread([this](std::stop_token st) { run(st); });
}

void Telemetry::stop() {
    if (sampler_.joinable()) {
        sampler_.request_stop();
        subs_cv_.notify_all();
        sampler_.join();
    }
    std::lock_guard lock(subs_mu_);
    for (auto& s : subscribers_) s->close();
    subscribers_.clear();
}

DeviceSnapshot Telemetry::sample_devices() {
    DeviceSnapshot snap;
    try {
        auto devices = provider_->sample();
        for (const auto& [id, s] : devices) {
            if (!(s.utilization >= 0 && s.utilization <= 1) || s.memory_used > s.memory_total) {
                throw Error(ErrorCode::ProviderFailure, "provider reported out-of-range values for " + id);
            }
        }
        std::lock_guard lock(snapshot_mu_);
        snap.timestamp = util::now();
        snap.devices = std::move(devices);
        snap.sequence = ++sequence_;
        latest_ = snap;
        return snap;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ProviderFailure) throw;
    }
    std::lock_guard lock(snapshot_mu_);
    if (latest_) snap = *latest_;
    snap.stale = true;
    if (latest_) latest_->stale = true;
    return snap;
}

DeviceSnapshot Telemetry::latest() {
    {
        std::lock_guard lock(snapshot_mu_);
        if (latest_) return *latest_;
    }
    return sample_devices();
}

bool Telemetry::device_known(const std::string& device) { return latest().devices.count(device) > 0; }

std::shared_ptr<Subscription> Telemetry::subscribe(std::chrono::milliseconds interval) {
    if (interval < std::chrono::milliseconds(10)) {
        throw Error(ErrorCode::InvalidArgument, "subscription interval must be >= 10 ms");
    }
    auto sub = std::make_shared<Subscription>(interval, options_.subscriber_capacity);
    {
        std::lock_guard lock(subs_mu_);
        subscribers_.push_back(sub);
    }
    start();
    subs_cv_.notify_all();
    return sub;
}

void Telemetry::run(std::stop_token stop) {
    auto next_periodic = SteadyClock::now();
    while (!stop.stop_requested()) {
        {
            std::unique_lock lock(subs_mu_);
            auto wake = next_periodic;
            for (const auto& s : subscribers_) wake = std::min(wake, s->next_due_);
            subs_cv_.wait_until(lock, stop, wake, [&] {
                auto earliest = next_periodic;
                for (const auto& s : subscribers_) earliest = std::min(earliest, s->next_due_);
                return SteadyClock::now() >= earliest;
            });
        }
        if (stop.stop_requested()) break;

        const auto now = SteadyClock::now();
        const DeviceSnapshot snap = sample_devices();
        if (now >= next_periodic) {
            sample_tracked_instances();
            next_periodic = std::max(next_periodic + options_.interval, now);
        }

        std::lock_guard lock(subs_mu_);
        std::erase_if(subscribers_, [](const auto& s) { return s->closed(); });
        for (auto& s : subscribers_) {
            if (now < s->next_due_) continue;
            s->push(snap);
            s->next_due_ += s->interval_;
            // A consumer that fell behind a whole interval restarts its cadence.
            if (s->next_due_ <= now) s->next_due_ = now + s->interval_;
        }
    }
}

void Telemetry::track_instance(const std::string& instance_id, int pid) {
    std::lock_guard lock(instances_mu_);
    Tracked t;
    t.pid = pid;
    instances_[instance_id] = t;
}

void Telemetry::untrack_instance(const std::string& instance_id) {
    std::lock_guard lock(instances_mu_);
    instances_.erase(instance_id);
}

InstanceStats Telemetry::sample_instance(const std::string& instance_id) {
    std::lock_guard lock(instances_mu_);
    auto it = instances_.find(instance_id);
    if (it == instances_.end()) throw Error(ErrorCode::NotFound, "instance " + instance_id + " is not tracked");
    Tracked& t = it->second;
    const auto raw = reader_.read(t.pid);
    if (!raw) throw Error(ErrorCode::NotFound, "instance " + instance_id + " process has exited");

    static const double ticks_per_s = static_cast<double>(::sysconf(_SC_CLK_TCK));
    static const double ncpu = static_cast<double>(std::max(1L, ::sysconf(_SC_NPROCESSORS_ONLN)));
    const auto now = SteadyClock::now();

    InstanceStats s = t.last_stats;
    s.instance_id = instance_id;
    s.timestamp = util::now();
    s.memory_bytes = raw->rss_bytes;
    // Counters are clamped so a namespace counter reset never reads as a decrease.
    s.net_rx_bytes = std::max(t.last_stats.net_rx_bytes, raw->rx_bytes);
    s.net_tx_bytes = std::max(t.last_stats.net_tx_bytes, raw->tx_bytes);

    if (!t.last_raw) {
        // No baseline yet: average over the process lifetime.
        const double lifetime = reader_.uptime_seconds() - static_cast<double>(raw->start_ticks) / ticks_per_s;
        s.cpu_fraction = lifetime > 0 ? static_cast<double>(raw->cpu_ticks) / (lifetime * ticks_per_s * ncpu) : 0.0;
        t.last_raw = raw;
        t.last_at = now;
    } else {
        const double wall = std::chrono::duration<double>(now - t.last_at).count();
        // Clock ticks are coarse; keep the previous figure for very short gaps.
        if (wall >= 0.05) {
            const double dticks = static_cast<double>(raw->cpu_ticks - std::min(raw->cpu_ticks, t.last_raw->cpu_ticks));
            s.cpu_fraction = dticks / (wall * ticks_per_s * ncpu);
            t.last_raw = raw;
            t.last_at = now;
        }
    }
    s.cpu_fraction = std::clamp(s.cpu_fraction, 0.0, 1.0);
    t.last_stats = s;
    t.sampled = true;
    return s;
}

void Telemetry::sample_tracked_instances() {
    std::vector<std::string> ids;
    {
        std::lock_guard lock(instances_mu_);
        for (const auto& [id, t] : instances_) ids.push_back(id);
    }
    for (const auto& id : ids) {
        try {
            sample_instance(id);
        } catch (const Error&) {
            // Exited or untracked meanwhile; the dispatcher reports that.
        }
    }
}

std::string Telemetry::exposition() {
    const DeviceSnapshot snap = latest();
    std::vector<InstanceStats> instances;
    {
        std::lock_guard lock(instances_mu_);
        for (const auto& [id, t] : instances_) {
            if (t.sampled) instances.push_back(t.last_stats);
        }
    }
    return render_exposition(snap, instances);
}

namespace {

std::string number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, end) : "NaN";
}

std::string label_value(const std::string& v) {
    std::string out;
    for (char c : v) {
        if (c == '\\') out += "\\\\";
        else if (c == '"') out += "\\\"";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

void family(std::string& out, const char* name, const char* type, const char* help) {
    out += "# HELP ";
    out += name;
    out += ' ';
    out += help;
    out += "\n# TYPE ";
    out += name;
    out += ' ';
    out += type;
    out += '\n';
}

void sample(std::string& out, const char* name, const char* label, const std::string& value, const std::string& v) {
    out += name;
    out += '{';
    out += label;
    out += "=\"";
    out += label_value(value);
    out += "\"} ";
    out += v;
    out += '\n';
}

}  // namespace

std::string render_exposition(const DeviceSnapshot& devices, const std::vector<InstanceStats>& instances) {
    std::string out;
    family(out, "device_utilization", "gauge", "Device utilization as a fraction of capacity.");
    for (const auto& [id, s] : devices.devices) sample(out, "device_utilization", "device", id, number(s.utilization));
    family(out, "device_memory_used_bytes", "gauge", "Device memory in use.");
    for (const auto& [id, s] : devices.devices)
        sample(out, "device_memory_used_bytes", "device", id, std::to_string(s.memory_used));
    family(out, "device_memory_total_bytes", "gauge", "Device memory capacity.");
    for (const auto& [id, s] : devices.devices)
        sample(out, "device_memory_total_bytes", "device", id, std::to_string(s.memory_total));
    family(out, "telemetry_snapshot_stale", "gauge", "1 when the device provider failed and samples are re-served.");
    out += "telemetry_snapshot_stale ";
    out += devices.stale ? "1\n" : "0\n";

    family(out, "instance_cpu_fraction", "gauge", "Instance CPU use as a fraction of all host CPUs.");
    for (const auto& s : instances) sample(out, "instance_cpu_fraction", "instance", s.instance_id, number(s.cpu_fraction));
    family(out, "instance_memory_bytes", "gauge", "Instance resident memory.");
    for (const auto& s : instances)
        sample(out, "instance_memory_bytes", "instance", s.instance_id, std::to_string(s.memory_bytes));
    family(out, "instance_network_receive_bytes_total", "counter", "Bytes received in the instance network namespace.");
    for (const auto& s : instances)
        sample(out, "instance_network_receive_bytes_total", "instance", s.instance_id, std::to_string(s.net_rx_bytes));
    family(out, "instance_network_transmit_bytes_total", "counter", "Bytes sent in the instance network namespace.");
    for (const auto& s : instances)
        sample(out, "instance_network_transmit_bytes_total", "instance", s.instance_id, std::to_string(s.net_tx_bytes));
    return out;
}

}  // namespace modelci::telemetry
