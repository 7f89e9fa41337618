#include "agentry/log.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>

#include <nlohmann/json.hpp>

namespace agentry::logging {

namespace {

struct Sink {
    std::mutex mu;
    std::unique_ptr<std::ofstream> file;
    bool to_stderr = false;
    bool on = false;

    Sink() {
        if (const char* env = std::getenv("AGENTRY_LOG")) {
            if (std::string_view(env) == "stderr") {
                to_stderr = true;
                on = true;
            } else if (*env != '\0') {
                file = std::make_unique<std::ofstream>(env, std::ios::app);
                on = file->is_open();
            }
        }
    }
};

Sink& sink() {
    static Sink s;
    return s;
}

}  // namespace

void set_sink_path(const std::string& path) {
    Sink& s = sink();
    std::lock_guard lock(s.mu);
    s.file = std::make_unique<std::ofstream>(path, std::ios::app);
    s.to_stderr = false;
    s.on = s.file->is_open();
}

void set_sink_stderr() {
    Sink& s = sink();
    std::lock_guard lock(s.mu);
    s.file.reset();
    s.to_stderr = true;
    s.on = true;
}

void disable() {
    Sink& s = sink();
    std::lock_guard lock(s.mu);
    s.file.reset();
    s.to_stderr = false;
    s.on = false;
}

bool enabled() {
    Sink& s = sink();
    std::lock_guard lock(s.mu);
    return s.on;
}

void emit(nlohmann::json fields) {
    Sink& s = sink();
    std::lock_guard lock(s.mu);
    if (!s.on) return;
    fields["ts"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
    std::string line = fields.dump();
    if (s.to_stderr) {
        std::fprintf(stderr, "%s\n", line.c_str());
    } else if (s.file) {
        (*s.file) << line << '\n';
        s.file->flush();
    }
}

}  // namespace agentry::logging
