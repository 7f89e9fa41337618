#include <cstdio>

#include <CLI11.hpp>

#include "../bench/behaviors.hpp"
#include "../bench/report.hpp"
#include "../bench/scenarios.hpp"

using namespace agentry::bench;

namespace {

int finish(const std::string& scenario, const GateReport& gates) {
    gates.print(scenario);
    if (!gates.all_pass()) {
        std::printf("%s: gate failure\n", scenario.c_str());
        return 1;
    }
    return 0;
}

std::vector<size_t> parse_sizes(const std::string& csv_sizes) {
    std::vector<size_t> out;
    size_t pos = 0;
    while (pos < csv_sizes.size()) {
        size_t comma = csv_sizes.find(',', pos);
        if (comma == std::string::npos) comma = csv_sizes.size();
        out.push_back(std::stoull(csv_sizes.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentry microbenchmarks"};
    app.require_subcommand(1);

    std::string csv_path;
    app.add_option("--csv", csv_path, "Append records to this CSV file");

    // startup
    auto* startup = app.add_subcommand("startup", "Warm-start time for n agents");
    int su_agents = 1, su_reps = 5;
    startup->add_option("--agents", su_agents)->capture_default_str();
    startup->add_option("--reps", su_reps)->capture_default_str();

    // weak-scaling
    auto* weak = app.add_subcommand("weak-scaling", "Sleep actions per agent, concurrency 1");
    std::string ws_agents = "1,8,64";
    int ws_actions = 30, ws_sleep = 1000;
    weak->add_option("--agents", ws_agents, "Comma-separated agent counts")
        ->capture_default_str();
    weak->add_option("--actions", ws_actions)->capture_default_str();
    weak->add_option("--sleep-ms", ws_sleep)->capture_default_str();

    // latency
    auto* lat = app.add_subcommand("latency", "No-op action round trip vs payload size");
    std::string lat_sizes = "10240";
    int lat_trials = 1000, lat_inject = 0;
    std::string lat_mode = "dist-direct";
    bool lat_ref = false;
    lat->add_option("--payload-sizes", lat_sizes, "Comma-separated byte sizes")
        ->capture_default_str();
    lat->add_option("--trials", lat_trials)->capture_default_str();
    lat->add_option("--mode", lat_mode, "local | dist-direct | dist-relay")
        ->capture_default_str();
    lat->add_option("--inject-latency-ms", lat_inject)->capture_default_str();
    lat->add_flag("--pass-by-ref", lat_ref, "Replace large payloads with references");

    // throughput
    auto* thr = app.add_subcommand("throughput", "No-op bag to a worker pool");
    int thr_workers = 8, thr_tasks = 20000, thr_handles = 32;
    bool thr_ablation = false;
    thr->add_option("--workers", thr_workers)->capture_default_str();
    thr->add_option("--tasks", thr_tasks)->capture_default_str();
    thr->add_option("--handles", thr_handles)->capture_default_str();
    thr->add_flag("--ablation", thr_ablation, "Also measure per-handle listeners");

    // chain
    auto* chain = app.add_subcommand("chain", "Action chain across n agents");
    int ch_stages = 4, ch_inject = 0;
    size_t ch_payload = 10u << 20;
    bool ch_ref = false;
    chain->add_option("--agents", ch_stages)->capture_default_str();
    chain->add_option("--payload", ch_payload)->capture_default_str();
    chain->add_flag("--pass-by-ref", ch_ref);
    chain->add_option("--inject-latency-ms", ch_inject)->capture_default_str();

    // conversation
    auto* conv = app.add_subcommand("conversation", "Two agents exchange messages");
    int cv_rounds = 10;
    size_t cv_size = 1024;
    conv->add_option("--rounds", cv_rounds)->capture_default_str();
    conv->add_option("--size", cv_size)->capture_default_str();

    // memory
    auto* mem = app.add_subcommand("memory", "Resident memory vs agent count");
    int mem_agents = 32;
    std::string mem_launcher = "in-process";
    mem->add_option("--agents", mem_agents)->capture_default_str();
    mem->add_option("--launcher", mem_launcher, "in-process | subprocess")
        ->capture_default_str();

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "4-stage pipeline exemplar");
    int pl_items = 100;
    size_t pl_bytes = 256 * 1024;
    std::string pl_kill, pl_trace;
    pipe->add_option("--items", pl_items)->capture_default_str();
    pipe->add_option("--item-bytes", pl_bytes)->capture_default_str();
    pipe->add_option("--kill-stage", pl_kill, "assembler | validator | recorder");
    pipe->add_option("--trace", pl_trace, "Structured-log file for stage traces");

    CLI11_PARSE(app, argc, argv);
    register_bench_behaviors();
    CsvWriter csv(csv_path);

    try {
        if (*startup) {
            auto r = run_startup(su_agents, su_reps, csv);
            std::printf("startup: agents=%d median=%.3f ms mad=%.3f ms\n", r.agents, r.median_ms,
                        r.mad_ms);
            return finish("startup", r.gates);
        }
        if (*weak) {
            std::vector<int> ks;
            for (size_t s : parse_sizes(ws_agents)) ks.push_back(static_cast<int>(s));
            auto r = run_weak_scaling(ks, ws_actions, ws_sleep, csv);
            for (const auto& [k, secs] : r.completion_s) {
                std::printf("weak-scaling: agents=%d completion=%.3f s\n", k, secs);
            }
            return finish("weak-scaling", r.gates);
        }
        if (*lat) {
            auto mode = parse_mode(lat_mode);
            if (!mode) throw std::invalid_argument("bad --mode");
            auto r = run_latency(parse_sizes(lat_sizes), lat_trials, *mode, lat_inject, lat_ref,
                                 csv);
            for (const auto& [size, rtt] : r.median_rtt_ms) {
                std::printf("latency: payload=%zu median=%.3f ms mad=%.3f ms\n", size, rtt,
                            r.mad_rtt_ms[size]);
            }
            return finish("latency", r.gates);
        }
        if (*thr) {
            auto r = run_throughput(thr_workers, thr_tasks, thr_handles, thr_ablation, csv);
            std::printf("throughput: multiplex=%.0f actions/s", r.multiplex_actions_per_s);
            if (thr_ablation) {
                std::printf(" per-handle=%.0f actions/s gain=%.1f%%", r.per_handle_actions_per_s,
                            r.gain_pct);
            }
            std::printf("\n");
            return finish("throughput", r.gates);
        }
        if (*chain) {
            auto r = run_chain(ch_stages, ch_payload, ch_ref, ch_inject, csv);
            std::printf("chain: rtt=%.3f ms transfers=%llu max_hop_bytes=%llu total_relay=%llu\n",
                        r.rtt_ms, static_cast<unsigned long long>(r.object_transfers),
                        static_cast<unsigned long long>(r.max_intermediate_hop_bytes),
                        static_cast<unsigned long long>(r.total_relay_bytes));
            return finish("chain", r.gates);
        }
        if (*conv) {
            auto r = run_conversation(cv_rounds, cv_size, csv);
            std::printf("conversation: rounds=%d elapsed=%.3f ms\n", r.rounds, r.elapsed_ms);
            return finish("conversation", r.gates);
        }
        if (*mem) {
            auto r = run_memory(mem_agents, mem_launcher, csv);
            std::printf("memory: launcher=%s per-agent=%.1f KiB\n", mem_launcher.c_str(),
                        r.slope_bytes_per_agent / 1024.0);
            return finish("memory", r.gates);
        }
        if (*pipe) {
            auto r = run_pipeline(pl_items, pl_bytes, pl_kill, csv, pl_trace);
            std::printf("pipeline: produced=%llu received=%llu unique=%llu\n",
                        static_cast<unsigned long long>(r.produced),
                        static_cast<unsigned long long>(r.received),
                        static_cast<unsigned long long>(r.unique));
            return finish("pipeline", r.gates);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "agentry-bench: %s\n", e.what());
        return 2;
    }
    return 0;
}
