#include "trace.hpp"

#include <fstream>

namespace agentry::bench {

std::vector<nlohmann::json> parse_trace(const std::string& path) {
    std::vector<nlohmann::json> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error&) {
        }
    }
    return out;
}

std::vector<nlohmann::json> filter_events(const std::vector<nlohmann::json>& trace,
                                          const std::string& event, const std::string& agent) {
    std::vector<nlohmann::json> out;
    for (const auto& e : trace) {
        if (!e.contains("event") || e["event"] != event) continue;
        if (!agent.empty() && (!e.contains("agent") || e["agent"] != agent)) continue;
        out.push_back(e);
    }
    return out;
}

}  // namespace agentry::bench
