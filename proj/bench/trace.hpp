#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentry::bench {

// Parses a runtime structured-log file (one JSON object per line).
// Malformed lines are skipped.
std::vector<nlohmann::json> parse_trace(const std::string& path);

// Events matching the given "event" field, optionally filtered by agent id.
std::vector<nlohmann::json> filter_events(const std::vector<nlohmann::json>& trace,
                                          const std::string& event,
                                          const std::string& agent = {});

}  // namespace agentry::bench
