#include <csignal>
#include <cstdio>

#include <CLI11.hpp>

#include "agentry/relay/server.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void handle_signal(int) {
    g_stop = 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentry relay store: entity registry, mailbox relay, and object store"};

    agentry::relay::RelayServerOptions options;
    std::string data_dir;
    bool no_persist = false;

    app.add_option("--host", options.host, "Listen address")->capture_default_str();
    app.add_option("--port", options.port, "Listen port (0 = ephemeral)")->capture_default_str();
    app.add_option("--data-dir", data_dir, "Persistence directory (empty = in-memory)");
    app.add_flag("--no-persist", no_persist, "Disable persistence even when --data-dir is set");
    app.add_option("--inject-latency-ms", options.inject_latency_ms,
                   "Emulated store-link latency per message hop")
        ->capture_default_str();
    app.add_option("--inject-bandwidth-mbps", options.inject_bandwidth_mbps,
                   "Emulated store-link bandwidth (with --inject-latency-ms; 0 = latency only)")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (!data_dir.empty() && !no_persist) options.data_dir = data_dir;

    agentry::relay::RelayServer server(options);
    try {
        server.start();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "relay-store: %s\n", e.what());
        return 1;
    }
    std::printf("relay-store listening on %s:%u%s\n", options.host.c_str(), server.port(),
                options.data_dir ? " (persistent)" : "");
    std::fflush(stdout);

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    return 0;
}
