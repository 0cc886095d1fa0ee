// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The ModelCI Authors

// modelci: the daemon and its command-line client.

#include <unistd.h>

#include <csignal>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "modelci/error.hpp"
#include "modelci/gateway/api_client.hpp"
#include "modelci/gateway/api_server.hpp"
#include "modelci/gateway/config.hpp"
#include "modelci/gateway/platform.hpp"
#include "modelci/util/fs.hpp"

using namespace modelci;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string url = gateway::default_api_url();
    bool json_output = false;
    std::string idempotency_key;
};

std::string url_encode(const std::string& s) {
    std::ostringstream out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == ':') {
            out << c;
        } else {
            out << '%' << std::uppercase << std::hex << std::setw(2) << std::setfill('0') << int(c);
        }
    }
    return out.str();
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string cell(const json& v) {
    if (v.is_null()) return "-";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream out;
        out << std::fixed << std::setprecision(2) << v.get<double>();
        return out.str();
    }
    return v.dump();
}

void print_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::cout << (i ? "  " : "") << std::left << std::setw(i + 1 == r.size() ? 0 : int(width[i])) << r[i];
        }
        std::cout << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
}

class Cli {
public:
    explicit Cli(const Globals& g) : g_(g), client_(g.url) {}

    // Checks the response, then prints either the raw body or the human view.
    void show(const gateway::ApiResponse& r, const std::function<void(const json&)>& human) {
        if (!r.ok()) gateway::raise_api_error(r);
        if (g_.json_output) {
            std::cout << r.body;
            if (isatty(STDOUT_FILENO)) std::cout << "\n";
            return;
        }
        human(r.json());
    }

    gateway::ApiClient::Headers mutation_headers() const {
        if (g_.idempotency_key.empty()) return {};
        return {{"Idempotency-Key", g_.idempotency_key}};
    }

    gateway::ApiClient& client() { return client_; }
    const Globals& globals() const { return g_; }

private:
    const Globals& g_;
    gateway::ApiClient client_;
};

void print_record(const json& r) {
    std::cout << "id:        " << cell(r["id"]) << "\n"
              << "name:      " << cell(r["name"]) << " v" << cell(r["version"]) << " (" << cell(r["framework"])
              << ")\n"
              << "task:      " << cell(r["task"]) << "\n"
              << "dataset:   " << cell(r["dataset"]) << "\n"
              << "status:    " << cell(r["status"]) << "\n"
              << "weights:   " << cell(r["weight_digest"]) << "\n"
              << "updated:   " << cell(r["updated_at"]) << "\n";
    if (!r["metrics"].empty()) {
        std::cout << "metrics:  ";
        for (const auto& [k, v] : r["metrics"].items()) std::cout << " " << k << "=" << cell(v);
        std::cout << "\n";
    }
    if (!r["variants"].empty()) {
        std::cout << "variants:\n";
        std::vector<std::vector<std::string>> rows;
        for (const auto& v : r["variants"]) {
            rows.push_back({cell(v["id"]), cell(v["format"]), cell(v["blob_digest"]).substr(0, 12)});
        }
        print_table({"ID", "FORMAT", "DIGEST"}, rows);
    }
    std::cout << "results:   " << r["profiling_results"].size() << "\n";
}

void print_models(const json& list) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : list) {
        rows.push_back({cell(r["id"]), cell(r["name"]), cell(r["framework"]), cell(r["version"]), cell(r["task"]),
                        cell(r["status"]), std::to_string(r["variants"].size())});
    }
    print_table({"ID", "NAME", "FRAMEWORK", "VERSION", "TASK", "STATUS", "VARIANTS"}, rows);
}

void print_instance(const json& i) {
    std::cout << "serving " << cell(i["id"]) << " at " << (i["protocol"] == "rest" ? "http://" : "grpc://")
              << cell(i["endpoint"]) << " (device " << cell(i["device"]) << ", backend " << cell(i["backend"])
              << ", " << cell(i["state"]) << ")\n";
}

void print_instances(const json& list) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& i : list) {
        rows.push_back({cell(i["id"]), cell(i["record_id"]), cell(i["device"]), cell(i["backend"]),
                        cell(i["protocol"]), cell(i["endpoint"]), cell(i["state"])});
    }
    print_table({"ID", "MODEL", "DEVICE", "BACKEND", "PROTOCOL", "ENDPOINT", "STATE"}, rows);
}

void print_jobs(const json& list) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& j : list) {
        rows.push_back({cell(j["id"]), cell(j["record_id"]), cell(j["variant_id"]), cell(j["state"]),
                        std::to_string(j["completed_cells"].size()) + "/" + cell(j["total_cells"]),
                        std::to_string(j["failed_cells"].size())});
    }
    print_table({"ID", "MODEL", "VARIANT", "STATE", "CELLS", "FAILED"}, rows);
}

void print_results(const json& list) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : list) {
        rows.push_back({cell(r["device"]), cell(r["backend"]), cell(r["protocol"]), cell(r["batch_size"]),
                        cell(r["peak_throughput"]), cell(r["p50_latency_ms"]), cell(r["p95_latency_ms"]),
                        cell(r["p99_latency_ms"]), cell(r["memory_bytes"]), cell(r["utilization"])});
    }
    print_table({"DEVICE", "BACKEND", "PROTOCOL", "BATCH", "THROUGHPUT", "P50_MS", "P95_MS", "P99_MS", "MEMORY",
                 "UTIL"},
                rows);
}

// Runs the daemon until SIGINT or SIGTERM.
int run_daemon(const std::optional<fs::path>& config_flag, const std::string& store, const std::string& bind,
               const char* argv0) {
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGTERM);
    sigaddset(&stop_signals, SIGINT);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    gateway::DaemonConfig config;
    if (auto path = gateway::resolve_config_path(config_flag)) config = gateway::load_config(*path);
    if (!store.empty()) {
        if (config.runtime_dir == config.store_path / "runtime") config.runtime_dir.clear();
        config.store_path = store;
    }
    if (!bind.empty()) {
        const auto colon = bind.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--bind expects host:port");
        config.bind_host = bind.substr(0, colon);
        config.bind_port = std::stoi(bind.substr(colon + 1));
    }
    if (config.mockserve_path == "modelci-mockserve") {
        // Prefer the backend installed next to this binary.
        std::error_code ec;
        auto self = fs::read_symlink("/proc/self/exe", ec);
        if (ec) self = fs::absolute(argv0);
        const auto sibling = self.parent_path() / "modelci-mockserve";
        if (fs::exists(sibling)) config.mockserve_path = sibling.string();
    }
    config.validate();

    gateway::Platform platform(config);
    platform.start();
    gateway::ApiServer server(platform, config.bind_host, config.bind_port);
    const int port = server.start();
    std::cout << "listening on http://" << config.bind_host << ":" << port << std::endl;

    int sig = 0;
    sigwait(&stop_signals, &sig);
    std::cerr << "modelci: shutting down\n";
    server.stop();
    platform.shutdown();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model deployment and profiling platform"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--url", g.url, "Daemon URL (default $MODELCI_URL or http://127.0.0.1:8765)");
    app.add_flag("--json", g.json_output, "Print the raw API response body");
    app.add_option("--idempotency-key", g.idempotency_key, "Idempotency-Key for state-changing calls");

    // daemon
    auto* daemon = app.add_subcommand("daemon", "Run the platform daemon");
    std::optional<fs::path> config_path;
    std::string store, bind;
    daemon->add_option("-c,--config", config_path, "Config file (default $MODELCI_CONFIG)");
    daemon->add_option("--store", store, "Store directory (overrides the config)");
    daemon->add_option("--bind", bind, "host:port (overrides the config)");

    // register
    auto* reg = app.add_subcommand("register", "Register a model");
    std::string manifest_path, weights_path;
    reg->add_option("-f,--manifest", manifest_path, "Manifest YAML")->required()->check(CLI::ExistingFile);
    reg->add_option("-w,--weights", weights_path, "Weights file")->required()->check(CLI::ExistingFile);

    // models
    auto* models = app.add_subcommand("models", "Query and manage registered models");
    models->require_subcommand(1);
    auto* models_list = models->add_subcommand("list", "List models");
    std::string q_name, q_framework, q_task, q_status;
    models_list->add_option("--name", q_name);
    models_list->add_option("--framework", q_framework);
    models_list->add_option("--task", q_task);
    models_list->add_option("--status", q_status);
    std::string model_id;
    auto* models_get = models->add_subcommand("get", "Show one model");
    models_get->add_option("id", model_id)->required();
    auto* models_update = models->add_subcommand("update", "Update mutable fields");
    models_update->add_option("id", model_id)->required();
    std::optional<std::string> u_task, u_dataset, u_status, u_if_match;
    std::vector<std::string> u_metrics;
    models_update->add_option("--task", u_task);
    models_update->add_option("--dataset", u_dataset);
    models_update->add_option("--status", u_status);
    models_update->add_option("--metric", u_metrics, "name=value (repeatable)");
    models_update->add_option("--if-match", u_if_match, "Expected updated_at");
    auto* models_delete = models->add_subcommand("delete", "Delete a model and its variants");
    models_delete->add_option("id", model_id)->required();

    // convert
    auto* convert = app.add_subcommand("convert", "Convert a model to deployable formats");
    convert->add_option("id", model_id)->required();
    std::string targets;
    convert->add_option("--targets", targets, "Comma-separated target formats");

    // profile
    auto* profile = app.add_subcommand("profile", "Queue profiling sweeps for a model");
    profile->add_option("id", model_id)->required();
    std::string p_batches, p_devices, p_backends, p_variant;
    int p_requests = 0;
    profile->add_option("--batch-sizes", p_batches, "Comma-separated batch sizes");
    profile->add_option("--devices", p_devices, "Comma-separated device ids");
    profile->add_option("--backends", p_backends, "Comma-separated serving backends");
    profile->add_option("--variant", p_variant, "Profile one variant only");
    profile->add_option("--requests", p_requests, "Requests per cell");

    // results
    auto* results = app.add_subcommand("results", "Show profiling results");
    results->add_option("id", model_id)->required();
    bool csv = false;
    results->add_flag("--csv", csv, "CSV output");

    // deploy
    auto* deploy = app.add_subcommand("deploy", "Deploy a model as a service");
    deploy->add_option("id", model_id)->required();
    std::string d_device, d_backend = "mockserve", d_protocol = "rest", d_variant;
    deploy->add_option("--device", d_device, "Device id, or 'auto' to let the controller place it");
    deploy->add_option("--backend", d_backend)->capture_default_str();
    deploy->add_option("--protocol", d_protocol)->capture_default_str();
    deploy->add_option("--variant", d_variant);

    // instances
    auto* instances = app.add_subcommand("instances", "Running service instances");
    instances->require_subcommand(1);
    auto* instances_list = instances->add_subcommand("list", "List instances");
    bool all_instances = false;
    instances_list->add_flag("--all", all_instances, "Include stopped instances");
    std::string instance_id;
    auto* instances_stop = instances->add_subcommand("stop", "Stop an instance");
    instances_stop->add_option("id", instance_id)->required();

    auto* devices = app.add_subcommand("devices", "Device utilization and idleness");
    auto* jobs = app.add_subcommand("jobs", "List profiling jobs");
    auto* job = app.add_subcommand("job", "Show one profiling job");
    std::string job_id;
    job->add_option("id", job_id)->required();
    auto* backends = app.add_subcommand("backends", "Serving backend templates");
    auto* placements = app.add_subcommand("placements", "Pending and finished placements");
    auto* events = app.add_subcommand("events", "Follow the event stream");
    std::optional<std::uint64_t> last_event_id;
    events->add_option("--last-event-id", last_event_id);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*daemon) return run_daemon(config_path, store, bind, argv[0]);

        Cli cli(g);
        auto& c = cli.client();
        const auto mh = cli.mutation_headers();
        const std::string model_path = "/api/models/" + url_encode(model_id);

        if (*reg) {
            cli.show(c.register_model(util::read_file(manifest_path), util::read_file(weights_path), mh),
                     [](const json& r) {
                         std::cout << "registered " << cell(r["id"]) << " (" << cell(r["name"]) << " v"
                                   << cell(r["version"]) << ", " << cell(r["status"]) << ")\n";
                     });
        } else if (*models_list) {
            std::string query;
            auto add = [&](const char* k, const std::string& v) {
                if (!v.empty()) query += (query.empty() ? "?" : "&") + std::string(k) + "=" + url_encode(v);
            };
            add("name", q_name);
            add("framework", q_framework);
            add("task", q_task);
            add("status", q_status);
            cli.show(c.get("/api/models" + query), print_models);
        } else if (*models_get) {
            cli.show(c.get(model_path), print_record);
        } else if (*models_update) {
            json patch = json::object();
            if (u_task) patch["task"] = *u_task;
            if (u_dataset) patch["dataset"] = *u_dataset;
            if (u_status) patch["status"] = *u_status;
            if (!u_metrics.empty()) {
                json metrics = json::object();
                for (const auto& m : u_metrics) {
                    const auto eq = m.find('=');
                    if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--metric expects name=value");
                    metrics[m.substr(0, eq)] = std::stod(m.substr(eq + 1));
                }
                patch["metrics"] = metrics;
            }
            auto headers = mh;
            if (u_if_match) headers["If-Match"] = *u_if_match;
            cli.show(c.patch(model_path, patch, headers), print_record);
        } else if (*models_delete) {
            cli.show(c.del(model_path, mh), [&](const json& s) {
                std::cout << "deleted " << model_id << " (" << s.dump() << ")\n";
            });
        } else if (*convert) {
            json body = json::object();
            if (!targets.empty()) body["targets"] = split_csv(targets);
            cli.show(c.post(model_path + "/convert", body, mh), [](const json& r) {
                for (const auto& v : r["variants"]) std::cout << "variant " << cell(v["id"]) << " " << cell(v["format"]) << "\n";
                for (const auto& f : r["failures"]) std::cout << "failed  " << f.dump() << "\n";
                std::cout << "status  " << cell(r["record"]["status"]) << "\n";
            });
        } else if (*profile) {
            json body = json::object();
            if (!p_batches.empty()) {
                std::vector<int> sizes;
                for (const auto& b : split_csv(p_batches)) sizes.push_back(std::stoi(b));
                body["batch_sizes"] = sizes;
            }
            if (!p_devices.empty()) body["devices"] = split_csv(p_devices);
            if (!p_backends.empty()) body["backends"] = split_csv(p_backends);
            if (!p_variant.empty()) body["variant_id"] = p_variant;
            if (p_requests > 0) body["requests_per_cell"] = p_requests;
            cli.show(c.post(model_path + "/profile", body, mh), [](const json& r) { print_jobs(r["jobs"]); });
        } else if (*results) {
            if (csv) {
                const auto r = c.get(model_path + "/results?format=csv");
                if (!r.ok()) gateway::raise_api_error(r);
                std::cout << r.body;
            } else {
                cli.show(c.get(model_path + "/results"), print_results);
            }
        } else if (*deploy) {
            json body = {{"backend", d_backend}, {"protocol", d_protocol}};
            if (!d_device.empty() && d_device != "auto") body["device"] = d_device;
            if (!d_variant.empty()) body["variant_id"] = d_variant;
            cli.show(c.post(model_path + "/deploy", body, mh), [](const json& r) {
                if (r.contains("placement_id")) {
                    std::cout << "placement " << cell(r["placement_id"])
                              << " pending: no idle device yet (see `modelci placements`)\n";
                } else {
                    print_instance(r);
                }
            });
        } else if (*instances_list) {
            cli.show(c.get(all_instances ? "/api/instances?all=true" : "/api/instances"), print_instances);
        } else if (*instances_stop) {
            cli.show(c.del("/api/instances/" + url_encode(instance_id), mh), [](const json& i) {
                std::cout << "stopped " << cell(i["id"]) << "\n";
            });
        } else if (*devices) {
            cli.show(c.get("/api/devices"), [](const json& d) {
                std::vector<std::vector<std::string>> rows;
                for (const auto& dev : d["devices"]) {
                    rows.push_back({cell(dev["id"]), cell(dev["utilization"]), cell(dev["memory_used"]),
                                    cell(dev["memory_total"]), dev["idle"].get<bool>() ? "yes" : "no",
                                    cell(dev["running_job"])});
                }
                print_table({"DEVICE", "UTIL", "MEM_USED", "MEM_TOTAL", "IDLE", "JOB"}, rows);
                if (d["stale"].get<bool>()) std::cout << "(telemetry is stale)\n";
            });
        } else if (*jobs) {
            cli.show(c.get("/api/jobs"), print_jobs);
        } else if (*job) {
            cli.show(c.get("/api/jobs/" + url_encode(job_id)), [](const json& j) {
                print_jobs(json::array({j}));
                if (!j["results"].empty()) print_results(j["results"]);
            });
        } else if (*backends) {
            cli.show(c.get("/api/backends"), [](const json& list) {
                std::vector<std::vector<std::string>> rows;
                for (const auto& b : list) {
                    std::string formats;
                    for (const auto& f : b["accepted_formats"]) formats += (formats.empty() ? "" : ",") + cell(f);
                    rows.push_back({cell(b["name"]), formats});
                }
                print_table({"NAME", "FORMATS"}, rows);
            });
        } else if (*placements) {
            cli.show(c.get("/api/placements"), [](const json& list) {
                std::vector<std::vector<std::string>> rows;
                for (const auto& p : list) {
                    rows.push_back({cell(p["placement_id"]), cell(p["variant_id"]), cell(p["backend"]), cell(p["state"]),
                                    cell(p["instance_id"]), cell(p["error"])});
                }
                print_table({"ID", "VARIANT", "BACKEND", "STATE", "INSTANCE", "ERROR"}, rows);
            });
        } else if (*events) {
            c.events(last_event_id, [&](const gateway::Event& e) {
                if (g.json_output) {
                    std::cout << json{{"id", e.id}, {"type", e.type}, {"data", e.data}}.dump() << std::endl;
                } else {
                    std::cout << e.id << " " << e.type << " " << e.data.dump() << std::endl;
                }
                return true;
            });
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << code_name(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
