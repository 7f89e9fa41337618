#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include "agentry/behavior.hpp"
#include "agentry/net.hpp"
#include "agentry/relay/protocol.hpp"

namespace agentry::relay {

struct RelayServerOptions {
    std::string host = "127.0.0.1";
    uint16_t port = 7420;  // 0 binds an ephemeral port
    // Persistence root; disabled when unset. Registry, specs, pending
    // messages and objects survive a restart; advertised endpoints do not.
    std::optional<std::filesystem::path> data_dir;
    // Emulated store-link latency per message hop (0 = off). When on, hops
    // also pay a serialization delay of bytes / inject_bandwidth_mbps.
    int inject_latency_ms = 0;
    double inject_bandwidth_mbps = 800.0;  // 0 = latency only
    std::chrono::milliseconds poll_wait_ceiling{30000};
    size_t snapshot_every = 1024;
};

// Standalone store + relay: entity registry, persisted mailboxes, discovery
// index, endpoint directory, and a byte-addressed object store over framed
// TCP. One acceptor, one session thread per connection, state behind one
// lock (control traffic is small).
class RelayServer {
public:
    explicit RelayServer(RelayServerOptions options);
    ~RelayServer();

    RelayServer(const RelayServer&) = delete;
    RelayServer& operator=(const RelayServer&) = delete;

    void start();
    void stop();

    uint16_t port() const { return port_; }
    net::Endpoint endpoint() const { return {options_.host, port_}; }

    std::string stats_json();

private:
    struct PendingMsg {
        Bytes frame;
        std::chrono::steady_clock::time_point visible_at;
    };

    struct EntityRec {
        std::optional<BehaviorSpec> spec;
        std::optional<std::string> endpoint;
        bool closed = false;
        std::deque<PendingMsg> queue;
        std::chrono::steady_clock::time_point last_visible{};
        uint64_t msgs_in = 0;
        uint64_t bytes_in = 0;
        std::shared_ptr<std::condition_variable> cv = std::make_shared<std::condition_variable>();
    };

    struct StoredObject {
        Bytes bytes;
        std::optional<int64_t> expires_unix_ms;
    };

    struct Outcome {
        Bytes response;
        // Invoked with the delivery result; poll responses use it to commit
        // or roll back the dequeue.
        std::function<void(bool delivered)> after;
    };

    void accept_loop();
    void session(net::Socket sock);
    Outcome handle_request(const Bytes& request);

    Bytes op_register(ByteReader& r);
    Bytes op_advertise(ByteReader& r);
    Bytes op_locate(ByteReader& r);
    Bytes op_put_msg(ByteReader& r);
    Outcome op_poll_msgs(ByteReader& r);
    Bytes op_close(ByteReader& r);
    Bytes op_discover(ByteReader& r);
    Bytes op_obj_put(ByteReader& r);
    Bytes op_obj_get(ByteReader& r);
    Bytes op_obj_del(ByteReader& r);

    std::chrono::milliseconds transit_delay(size_t bytes) const;

    // Persistence. All appenders run with mu_ held.
    void log_append(const Bytes& record, bool sync);
    void maybe_snapshot_locked();
    void write_snapshot_locked();
    void load();
    void apply_record(ByteReader& r);

    RelayServerOptions options_;
    uint16_t port_ = 0;
    net::Listener listener_;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};

    std::mutex sessions_mu_;
    std::list<std::thread> sessions_;
    std::atomic<int> open_sessions_{0};

    std::mutex mu_;
    std::unordered_map<EntityId, EntityRec> entities_;
    std::unordered_map<std::string, StoredObject> objects_;
    int log_fd_ = -1;
    size_t mutations_since_snapshot_ = 0;

    std::atomic<uint64_t> op_counts_[12]{};
    std::atomic<uint64_t> bytes_in_{0};
    std::atomic<uint64_t> bytes_out_{0};
    std::chrono::steady_clock::time_point started_at_{};
};

}  // namespace agentry::relay
