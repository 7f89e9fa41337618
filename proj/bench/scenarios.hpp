#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "report.hpp"

namespace agentry::bench {

enum class Mode { Local, DistDirect, DistRelay };

std::optional<Mode> parse_mode(const std::string& text);
std::string_view mode_name(Mode m);

struct StartupResult {
    int agents = 0;
    std::vector<double> rep_ms;
    double median_ms = 0;
    double mad_ms = 0;
    GateReport gates;
};
StartupResult run_startup(int agents, int reps, CsvWriter& csv);

struct WeakScalingResult {
    std::map<int, double> completion_s;
    GateReport gates;
};
WeakScalingResult run_weak_scaling(const std::vector<int>& agent_counts, int actions_per_agent,
                                   int sleep_ms, CsvWriter& csv);

struct LatencyResult {
    std::map<size_t, double> median_rtt_ms;
    std::map<size_t, double> mad_rtt_ms;
    GateReport gates;
};
LatencyResult run_latency(const std::vector<size_t>& payload_sizes, int trials, Mode mode,
                          int inject_latency_ms, bool pass_by_ref, CsvWriter& csv);

struct ThroughputResult {
    double multiplex_actions_per_s = 0;
    double per_handle_actions_per_s = 0;  // 0 when the ablation is skipped
    double gain_pct = 0;
    GateReport gates;
};
ThroughputResult run_throughput(int workers, int tasks, int handles, bool ablation,
                                CsvWriter& csv);

struct ChainResult {
    double rtt_ms = 0;
    uint64_t max_intermediate_hop_bytes = 0;
    uint64_t total_relay_bytes = 0;
    uint64_t object_transfers = 0;
    uint64_t store_object_gets = 0;
    GateReport gates;
};
ChainResult run_chain(int stages, size_t payload_bytes, bool pass_by_ref, int inject_latency_ms,
                      CsvWriter& csv);

struct ConversationResult {
    double elapsed_ms = 0;
    int rounds = 0;
    GateReport gates;
};
ConversationResult run_conversation(int rounds, size_t message_bytes, CsvWriter& csv);

struct MemoryResult {
    double baseline_rss_bytes = 0;
    double slope_bytes_per_agent = 0;
    GateReport gates;
};
MemoryResult run_memory(int agents, const std::string& launcher, CsvWriter& csv);

struct PipelineResult {
    uint64_t produced = 0;
    uint64_t received = 0;
    uint64_t unique = 0;
    GateReport gates;
};
PipelineResult run_pipeline(int items, size_t item_bytes, const std::string& kill_stage,
                            CsvWriter& csv, const std::string& trace_path);

}  // namespace agentry::bench
