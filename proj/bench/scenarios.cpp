#include "scenarios.hpp"

#include <signal.h>

#include <deque>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "agentry/dist_exchange.hpp"
#include "agentry/launch/manager.hpp"
#include "agentry/launch/subprocess.hpp"
#include "agentry/local_exchange.hpp"
#include "agentry/relay/server.hpp"
#include "behaviors.hpp"

namespace agentry::bench {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(Clock::now() -
                                                                                 start)
        .count();
}

std::string size_param(size_t bytes) {
    return "payload=" + std::to_string(bytes);
}

// Resident set size in bytes, from /proc/<pid>/status.
double rss_bytes(pid_t pid) {
    std::ifstream in("/proc/" + std::to_string(pid) + "/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmRSS:", 0) == 0) {
            return std::stod(line.substr(6)) * 1024.0;
        }
    }
    return 0.0;
}

double self_rss_bytes() {
    return rss_bytes(::getpid());
}

// Embedded relay store for dist-mode scenarios.
struct EmbeddedStore {
    relay::RelayServer server;

    explicit EmbeddedStore(int inject_latency_ms, double bandwidth_mbps = 800.0)
        : server(make_options(inject_latency_ms, bandwidth_mbps)) {
        server.start();
    }

    static relay::RelayServerOptions make_options(int inject_latency_ms, double bandwidth_mbps) {
        relay::RelayServerOptions o;
        o.port = 0;
        o.inject_latency_ms = inject_latency_ms;
        o.inject_bandwidth_mbps = bandwidth_mbps;
        return o;
    }

    net::Endpoint endpoint() { return server.endpoint(); }
};

Bytes filler(size_t size, uint8_t tag = 0x42) {
    return Bytes(size, tag);
}

}  // namespace

std::optional<Mode> parse_mode(const std::string& text) {
    if (text == "local") return Mode::Local;
    if (text == "dist-direct") return Mode::DistDirect;
    if (text == "dist-relay") return Mode::DistRelay;
    return std::nullopt;
}

std::string_view mode_name(Mode m) {
    switch (m) {
        case Mode::Local: return "local";
        case Mode::DistDirect: return "dist-direct";
        case Mode::DistRelay: return "dist-relay";
    }
    return "?";
}

StartupResult run_startup(int agents, int reps, CsvWriter& csv) {
    if (agents <= 0) throw std::invalid_argument("startup requires at least one agent");
    if (reps < 3) reps = 3;
    register_bench_behaviors();

    StartupResult result;
    result.agents = agents;
    std::string params = "agents=" + std::to_string(agents);

    auto run_once = [&](bool record) {
        auto exchange = LocalExchange::create();
        Manager manager(exchange);
        manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());

        auto started = Clock::now();
        std::vector<Handle> handles;
        handles.reserve(static_cast<size_t>(agents));
        for (int i = 0; i < agents; ++i) {
            handles.push_back(manager.launch_registered("Worker"));
        }
        for (auto& h : handles) h.ping();
        double elapsed = ms_since(started);
        if (record) result.rep_ms.push_back(elapsed);
        manager.shutdown_all();
    };

    run_once(false);  // warm-up: lazy initialization out of the measurement
    for (int r = 0; r < reps; ++r) run_once(true);

    result.median_ms = median(result.rep_ms);
    result.mad_ms = mad(result.rep_ms);
    csv.row("startup", params, "warm_start_median", result.median_ms, "ms");
    csv.row("startup", params, "warm_start_mad", result.mad_ms, "ms");

    if (agents == 1) {
        result.gates.check("single-agent warm start < 10 ms",
                           result.median_ms < 10.0,
                           "median " + std::to_string(result.median_ms) + " ms");
    }
    if (agents >= 64) {
        result.gates.check("64-agent warm start < 2 s", result.median_ms < 2000.0,
                           "median " + std::to_string(result.median_ms) + " ms");
    }
    return result;
}

WeakScalingResult run_weak_scaling(const std::vector<int>& agent_counts, int actions_per_agent,
                                   int sleep_ms, CsvWriter& csv) {
    register_bench_behaviors();
    WeakScalingResult result;

    for (int k : agent_counts) {
        if (k <= 0) throw std::invalid_argument("agent count must be positive");
        auto exchange = LocalExchange::create();
        Manager manager(exchange);
        manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());

        std::vector<Handle> handles;
        handles.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) {
            handles.push_back(manager.launch_registered("Sleeper", R"({"concurrency":1})"));
        }
        for (auto& h : handles) h.ping();

        Bytes arg = to_bytes(json{{"ms", sleep_ms}}.dump());
        auto wait_budget = std::chrono::milliseconds(
            static_cast<int64_t>(actions_per_agent) * sleep_ms * 2 + 60000);

        auto started = Clock::now();
        std::vector<ActionFuture> futures;
        futures.reserve(static_cast<size_t>(k) * actions_per_agent);
        for (int a = 0; a < actions_per_agent; ++a) {
            for (auto& h : handles) futures.push_back(h.invoke("sleep", arg));
        }
        for (auto& f : futures) {
            auto r = f.wait_for(wait_budget);
            if (!r.ok()) throw AgentryError("sleep action failed: " + r.error().to_string());
        }
        double elapsed_s = ms_since(started) / 1000.0;
        result.completion_s[k] = elapsed_s;
        csv.row("weak-scaling", "agents=" + std::to_string(k), "completion", elapsed_s, "s");
        manager.shutdown_all();
    }

    if (actions_per_agent == 30 && sleep_ms == 1000) {
        double lo = 1e300, hi = 0;
        for (const auto& [k, s] : result.completion_s) {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
            result.gates.check("completion within [30, 33] s (k=" + std::to_string(k) + ")",
                               s >= 30.0 && s <= 33.0, std::to_string(s) + " s");
        }
        if (result.completion_s.size() > 1) {
            result.gates.check("max/min completion ratio < 1.15", hi / lo < 1.15,
                               "ratio " + std::to_string(hi / lo));
        }
    }
    return result;
}

LatencyResult run_latency(const std::vector<size_t>& payload_sizes, int trials, Mode mode,
                          int inject_latency_ms, bool pass_by_ref, CsvWriter& csv) {
    register_bench_behaviors();
    LatencyResult result;

    // Topology: the echo agent lives in another process for dist modes, in
    // this process for local mode.
    std::unique_ptr<EmbeddedStore> store;
    std::shared_ptr<ExchangeHub> hub;
    std::unique_ptr<Manager> manager;
    std::unique_ptr<MailboxRouter> router;
    Handle agent;

    std::string baseline_threshold = std::to_string(1ull << 40);  // never proxy
    if (mode == Mode::Local) {
        hub = LocalExchange::create();
        manager = std::make_unique<Manager>(hub);
        manager->add_launcher("in-process", std::make_shared<InProcessLauncher>());
        agent = manager->launch_registered("Echo");
    } else {
        store = std::make_unique<EmbeddedStore>(inject_latency_ms);
        DistOptions hub_options;
        hub_options.relay_only_messaging = (mode == Mode::DistRelay);
        auto dist_hub = std::make_shared<DistHub>(store->endpoint(), hub_options);
        hub = dist_hub;
        manager = std::make_unique<Manager>(hub);

        SubprocessOptions sub;
        sub.child_direct_listen = true;  // fetch serving stays on in relay mode
        if (mode == Mode::DistRelay) sub.extra_env.push_back({"AGENTRY_RELAY_ONLY", "1"});
        if (!pass_by_ref) sub.extra_env.push_back({"AGENTRY_INLINE_THRESHOLD", baseline_threshold});
        manager->add_launcher("subprocess", std::make_shared<SubprocessLauncher>(sub));
        agent = manager->launch_registered("Echo");
        // First contact can include child startup; get it out of the timings.
        for (int i = 0; i < 50; ++i) {
            try {
                agent.ping(std::chrono::seconds(1));
                break;
            } catch (const TimeoutError&) {
            }
        }
    }

    ObjectDepot* depot = manager->router().binding().depot();
    for (size_t size : payload_sizes) {
        Bytes data = filler(size);
        std::vector<double> rtts;
        rtts.reserve(static_cast<size_t>(trials));
        int warmup = std::max(3, trials / 100);
        for (int t = -warmup; t < trials; ++t) {
            Payload arg = (pass_by_ref && depot) ? depot->auto_payload(data)
                                                 : Payload::inline_bytes(data);
            auto started = Clock::now();
            auto r = agent.call("echo", std::move(arg), std::chrono::minutes(5));
            if (!r.ok()) throw AgentryError("echo failed: " + r.error().to_string());
            Bytes out = depot ? depot->materialize(r.payload()) : r.payload().bytes();
            if (out.size() != size) throw AgentryError("echo size mismatch");
            if (t >= 0) rtts.push_back(ms_since(started));
        }
        result.median_rtt_ms[size] = median(rtts);
        result.mad_rtt_ms[size] = mad(rtts);
        std::string params = size_param(size) + ";mode=" + std::string(mode_name(mode)) +
                             ";ref=" + (pass_by_ref ? "1" : "0") +
                             ";inject=" + std::to_string(inject_latency_ms);
        csv.row("latency", params, "rtt_median", result.median_rtt_ms[size], "ms");
        csv.row("latency", params, "rtt_mad", result.mad_rtt_ms[size], "ms");
    }

    if (mode == Mode::DistDirect && !pass_by_ref && inject_latency_ms == 0 && trials >= 1000) {
        auto it = result.median_rtt_ms.find(10240);
        if (it != result.median_rtt_ms.end()) {
            result.gates.check("10 KB direct RTT median < 2 ms", it->second < 2.0,
                               std::to_string(it->second) + " ms");
        }
    }
    // Latency must not decrease as payloads grow (sanity property).
    if (result.median_rtt_ms.size() > 1) {
        bool monotone = true;
        double prev = -1;
        for (const auto& [size, rtt] : result.median_rtt_ms) {
            if (prev > 0 && rtt + 0.25 + prev * 0.15 < prev) monotone = false;
            prev = rtt;
        }
        result.gates.check("median RTT nondecreasing in payload size", monotone, "tolerated 15%");
    }

    manager->shutdown_all();
    return result;
}

namespace {

double submit_bag(std::vector<Handle>& handles, int tasks, size_t window) {
    auto started = Clock::now();
    std::deque<ActionFuture> outstanding;
    for (int i = 0; i < tasks; ++i) {
        outstanding.push_back(handles[static_cast<size_t>(i) % handles.size()].invoke("work"));
        if (outstanding.size() >= window) {
            auto r = outstanding.front().wait_for(std::chrono::seconds(60));
            if (!r.ok()) throw AgentryError("work failed: " + r.error().to_string());
            outstanding.pop_front();
        }
    }
    while (!outstanding.empty()) {
        auto r = outstanding.front().wait_for(std::chrono::seconds(60));
        if (!r.ok()) throw AgentryError("work failed: " + r.error().to_string());
        outstanding.pop_front();
    }
    double elapsed_s = ms_since(started) / 1000.0;
    return tasks / elapsed_s;
}

}  // namespace

ThroughputResult run_throughput(int workers, int tasks, int handles, bool ablation,
                                CsvWriter& csv) {
    register_bench_behaviors();
    ThroughputResult result;

    // Multiplexed: every handle shares the manager's one mailbox/listener.
    {
        auto exchange = LocalExchange::create();
        Manager manager(exchange);
        manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());
        std::vector<EntityId> ids;
        for (int i = 0; i < workers; ++i) {
            ids.push_back(manager.launch_registered("Worker").target());
        }
        std::vector<Handle> hs;
        for (int i = 0; i < std::max(handles, workers); ++i) {
            hs.push_back(manager.handle_to(ids[static_cast<size_t>(i) % ids.size()]));
        }
        for (auto& h : hs) h.ping();
        result.multiplex_actions_per_s = submit_bag(hs, tasks, 256);
        manager.shutdown_all();
    }
    csv.row("throughput",
            "workers=" + std::to_string(workers) + ";handles=" + std::to_string(handles) +
                ";multiplex=1",
            "actions_per_s", result.multiplex_actions_per_s, "1/s");

    if (ablation) {
        // Per-handle baseline: each handle owns a registered client mailbox
        // and its own listener thread.
        auto exchange = LocalExchange::create();
        Manager manager(exchange);
        manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());
        std::vector<EntityId> ids;
        for (int i = 0; i < workers; ++i) {
            ids.push_back(manager.launch_registered("Worker").target());
        }
        std::vector<std::unique_ptr<MailboxRouter>> routers;
        std::vector<Handle> hs;
        for (int i = 0; i < std::max(handles, workers); ++i) {
            routers.push_back(std::make_unique<MailboxRouter>(
                exchange->register_and_bind(EntityRole::Client)));
            hs.push_back(routers.back()->handle_to(ids[static_cast<size_t>(i) % ids.size()]));
        }
        for (auto& h : hs) h.ping();
        result.per_handle_actions_per_s = submit_bag(hs, tasks, 256);
        manager.shutdown_all();
        for (auto& r : routers) r->stop();

        result.gain_pct = (result.multiplex_actions_per_s / result.per_handle_actions_per_s - 1.0) *
                          100.0;
        csv.row("throughput",
                "workers=" + std::to_string(workers) + ";handles=" + std::to_string(handles) +
                    ";multiplex=0",
                "actions_per_s", result.per_handle_actions_per_s, "1/s");
        csv.row("throughput", "handles=" + std::to_string(handles), "multiplex_gain",
                result.gain_pct, "%");
    }

    if (workers >= 8 && tasks >= 1000) {
        result.gates.check("throughput >= 1000 actions/s with 8 workers",
                           result.multiplex_actions_per_s >= 1000.0,
                           std::to_string(result.multiplex_actions_per_s) + " actions/s");
    }
    if (ablation && handles >= 32) {
        result.gates.check("multiplexing gains >= 10% over per-handle listeners",
                           result.gain_pct >= 10.0,
                           std::to_string(result.gain_pct) + "%");
    }
    return result;
}

ChainResult run_chain(int stages, size_t payload_bytes, bool pass_by_ref, int inject_latency_ms,
                      CsvWriter& csv) {
    if (stages < 1) throw std::invalid_argument("chain needs at least one stage");
    register_bench_behaviors();
    ChainResult result;

    EmbeddedStore store(inject_latency_ms);
    DistOptions options;
    options.relay_only_messaging = true;  // envelopes ride the store
    options.direct_listen = true;         // data plane stays point-to-point
    auto hub = std::make_shared<DistHub>(store.endpoint(), options);
    Manager manager(hub);
    manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());

    // Launch tail-first so every stage knows its downstream id.
    std::vector<EntityId> ids(static_cast<size_t>(stages));
    std::optional<EntityId> next;
    for (int i = stages - 1; i >= 0; --i) {
        json args = json::object();
        args["next"] = next ? json(next->to_string()) : json(nullptr);
        Handle h = manager.launch_registered("ChainStage", args.dump());
        ids[static_cast<size_t>(i)] = h.target();
        next = h.target();
    }
    Handle head = manager.handle_to(ids.front());
    head.ping(std::chrono::seconds(10));

    ObjectDepot* depot = manager.router().binding().depot();
    Bytes data = filler(payload_bytes);
    Payload arg = pass_by_ref ? Payload::reference(depot->proxy(data))
                              : Payload::inline_bytes(data);

    auto started = Clock::now();
    auto r = head.call("relay", arg, std::chrono::minutes(10));
    if (!r.ok()) throw AgentryError("chain relay failed: " + r.error().to_string());
    result.rtt_ms = ms_since(started);

    // The returned payload must match the input bytes (resolved locally for
    // the by-ref echo: this client is the origin).
    Bytes round_trip = depot->materialize(r.payload());
    if (round_trip != data) throw AgentryError("chain corrupted the payload");

    // Accounting: relay bytes per entity from server stats, transfers from
    // stage depots.
    json stats = json::parse(store.server.stats_json());
    const auto& ents = stats["entities"];
    uint64_t max_hop = 0;
    for (int i = 0; i < stages; ++i) {
        const std::string key = ids[static_cast<size_t>(i)].to_string();
        uint64_t bytes = ents.contains(key) ? ents[key]["bytes_in"].get<uint64_t>() : 0;
        result.total_relay_bytes += bytes;
        bool intermediate = i > 0 && i < stages - 1;
        if (intermediate) max_hop = std::max(max_hop, bytes);
        csv.row("chain", "stage=" + std::to_string(i + 1), "relay_bytes_in",
                static_cast<double>(bytes), "B");
    }
    result.max_intermediate_hop_bytes = max_hop;
    result.store_object_gets = stats["ops"]["obj_get"].get<uint64_t>();

    for (int i = 0; i < stages; ++i) {
        auto s = manager.handle_to(ids[static_cast<size_t>(i)]).call("stats");
        if (s.ok()) {
            json j = json::parse(to_string(s.payload().bytes()));
            result.object_transfers += j.value("fetches", uint64_t{0});
        }
    }

    std::string params = "stages=" + std::to_string(stages) + ";" + size_param(payload_bytes) +
                         ";ref=" + (pass_by_ref ? "1" : "0");
    csv.row("chain", params, "rtt", result.rtt_ms, "ms");
    csv.row("chain", params, "object_transfers", static_cast<double>(result.object_transfers),
            "count");
    csv.row("chain", params, "max_intermediate_hop_bytes",
            static_cast<double>(result.max_intermediate_hop_bytes), "B");

    if (pass_by_ref && stages >= 3 && payload_bytes >= (10u << 20)) {
        result.gates.check("intermediate hop relay bytes < 1 KB",
                           result.max_intermediate_hop_bytes < 1024,
                           std::to_string(result.max_intermediate_hop_bytes) + " B");
        result.gates.check(
            "exactly one object transfer",
            result.object_transfers == 1 && result.store_object_gets == 0,
            std::to_string(result.object_transfers) + " fetches, " +
                std::to_string(result.store_object_gets) + " store gets");
    }

    manager.shutdown_all();
    return result;
}

ConversationResult run_conversation(int rounds, size_t message_bytes, CsvWriter& csv) {
    if (rounds <= 0) throw std::invalid_argument("conversation needs at least one round");
    register_bench_behaviors();
    ConversationResult result;
    result.rounds = rounds;

    EmbeddedStore store(0);
    auto hub = std::make_shared<DistHub>(store.endpoint());
    Manager manager(hub);
    manager.add_launcher("subprocess", std::make_shared<SubprocessLauncher>());

    Handle a = manager.launch_registered("Chatter");
    Handle b = manager.launch_registered("Chatter");
    for (auto* h : {&a, &b}) {
        for (int i = 0; i < 50; ++i) {
            try {
                h->ping(std::chrono::seconds(1));
                break;
            } catch (const TimeoutError&) {
            }
        }
    }

    json req;
    req["peer"] = b.target().to_string();
    req["rounds"] = rounds;
    req["size"] = message_bytes;
    auto r = a.call("converse", Payload::inline_text(req.dump()), std::chrono::minutes(10));
    if (!r.ok()) throw AgentryError("conversation failed: " + r.error().to_string());
    json out = json::parse(to_string(r.payload().bytes()));
    result.elapsed_ms = out["elapsed_us"].get<double>() / 1000.0;

    std::string params = "rounds=" + std::to_string(rounds) + ";" + size_param(message_bytes);
    csv.row("conversation", params, "elapsed", result.elapsed_ms, "ms");
    csv.row("conversation", params, "per_message", result.elapsed_ms / (2.0 * rounds), "ms");

    if (message_bytes > (4u << 20)) {
        result.gates.check("messages above 4 MB succeed", true,
                           std::to_string(message_bytes) + " B round-tripped");
    }
    manager.shutdown_all();
    return result;
}

MemoryResult run_memory(int agents, const std::string& launcher, CsvWriter& csv) {
    if (agents <= 0) throw std::invalid_argument("memory scenario needs agents > 0");
    register_bench_behaviors();
    MemoryResult result;

    if (launcher == "in-process") {
        auto exchange = LocalExchange::create();
        Manager manager(exchange);
        manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        result.baseline_rss_bytes = self_rss_bytes();

        std::vector<Handle> handles;
        for (int i = 0; i < agents; ++i) handles.push_back(manager.launch_registered("Worker"));
        for (auto& h : handles) h.ping();
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        double after = self_rss_bytes();
        result.slope_bytes_per_agent = (after - result.baseline_rss_bytes) / agents;
        manager.shutdown_all();
    } else if (launcher == "subprocess") {
        EmbeddedStore store(0);
        auto hub = std::make_shared<DistHub>(store.endpoint());
        Manager manager(hub);
        auto sub = std::make_shared<SubprocessLauncher>();
        manager.add_launcher("subprocess", sub);
        result.baseline_rss_bytes = 0;

        std::vector<Handle> handles;
        for (int i = 0; i < agents; ++i) handles.push_back(manager.launch_registered("Worker"));
        for (auto& h : handles) {
            for (int i = 0; i < 50; ++i) {
                try {
                    h.ping(std::chrono::seconds(1));
                    break;
                } catch (const TimeoutError&) {
                }
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        double total = 0;
        for (auto& h : handles) {
            if (auto pid = sub->pid(h.target())) total += rss_bytes(*pid);
        }
        result.slope_bytes_per_agent = total / agents;
        manager.shutdown_all();
    } else {
        throw std::invalid_argument("unknown launcher: " + launcher);
    }

    csv.row("memory", "agents=" + std::to_string(agents) + ";launcher=" + launcher,
            "rss_per_agent", result.slope_bytes_per_agent, "B");
    result.gates.check("per-agent memory slope measured", result.slope_bytes_per_agent > 0,
                       std::to_string(result.slope_bytes_per_agent / 1024.0) + " KiB/agent");
    return result;
}

PipelineResult run_pipeline(int items, size_t item_bytes, const std::string& kill_stage,
                            CsvWriter& csv, const std::string& trace_path) {
    if (items <= 0) throw std::invalid_argument("pipeline needs items > 0");
    register_bench_behaviors();
    PipelineResult result;

    EmbeddedStore store(0);
    auto hub = std::make_shared<DistHub>(store.endpoint());
    Manager manager(hub);
    SubprocessOptions sub_options;
    sub_options.max_restarts = 3;
    if (!trace_path.empty()) sub_options.extra_env.push_back({"AGENTRY_LOG", trace_path});
    auto sub = std::make_shared<SubprocessLauncher>(sub_options);
    manager.add_launcher("subprocess", sub);

    Handle recorder = manager.launch_registered("PipeRecorder");
    Handle validator = manager.launch_registered(
        "PipeValidator", json{{"next", recorder.target().to_string()}}.dump());
    Handle assembler = manager.launch_registered(
        "PipeAssembler", json{{"next", validator.target().to_string()}}.dump());
    json gen_args;
    gen_args["next"] = assembler.target().to_string();
    gen_args["count"] = items;
    gen_args["item_bytes"] = item_bytes;
    Handle generator = manager.launch_registered("PipeGenerator", gen_args.dump());

    std::optional<EntityId> victim;
    if (kill_stage == "assembler") victim = assembler.target();
    if (kill_stage == "validator") victim = validator.target();
    if (kill_stage == "recorder") victim = recorder.target();
    if (!kill_stage.empty() && !victim) {
        throw std::invalid_argument("unknown kill stage: " + kill_stage);
    }

    if (victim) {
        std::this_thread::sleep_for(std::chrono::milliseconds(800));
        if (auto pid = sub->pid(*victim)) ::kill(*pid, SIGKILL);
    }

    auto deadline = Clock::now() + std::chrono::seconds(180);
    json report;
    while (Clock::now() < deadline) {
        auto r = recorder.call("report", Payload{}, std::chrono::seconds(10));
        if (r.ok()) {
            report = json::parse(to_string(r.payload().bytes()));
            if (report["unique"].get<uint64_t>() >= static_cast<uint64_t>(items)) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(500));
    }
    auto produced = generator.call("produced", Payload{}, std::chrono::seconds(10));
    if (produced.ok()) {
        result.produced = json::parse(to_string(produced.payload().bytes())).get<uint64_t>();
    }
    if (!report.is_null()) {
        result.received = report["received"].get<uint64_t>();
        result.unique = report["unique"].get<uint64_t>();
    }

    std::string params = "items=" + std::to_string(items) + ";kill=" +
                         (kill_stage.empty() ? "none" : kill_stage);
    csv.row("pipeline", params, "received", static_cast<double>(result.received), "count");
    csv.row("pipeline", params, "unique", static_cast<double>(result.unique), "count");

    result.gates.check("all items recorded exactly once at the sink",
                       result.unique == static_cast<uint64_t>(items),
                       std::to_string(result.unique) + "/" + std::to_string(items) + " unique, " +
                           std::to_string(result.received) + " received");
    manager.shutdown_all();
    return result;
}

}  // namespace agentry::bench
