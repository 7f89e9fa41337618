#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

namespace agentry::logging {

// Process-wide structured log sink: one JSON object per line. Disabled by
// default; enable with a path (append) or via the AGENTRY_LOG environment
// variable ("stderr" or a file path) read on first use.
void set_sink_path(const std::string& path);
void set_sink_stderr();
void disable();
bool enabled();

// Adds "ts" (milliseconds since the unix epoch) and writes the object.
void emit(nlohmann::json fields);

}  // namespace agentry::logging
