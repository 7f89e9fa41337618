#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "agentry/dataplane.hpp"
#include "agentry/exchange.hpp"
#include "agentry/net.hpp"
#include "agentry/relay/client.hpp"

namespace agentry {

struct DistOptions {
    // Accept peer connections (direct envelopes + object fetches) and
    // advertise the listener at the store.
    bool direct_listen = true;
    // Never *send* envelopes directly, even when the peer advertises an
    // endpoint (emulates a sender behind NAT); the listener, when enabled,
    // still serves object fetches.
    bool relay_only_messaging = false;
    std::string listen_host = "127.0.0.1";
    std::string advertise_host = "127.0.0.1";
    std::chrono::milliseconds poll_wait{1000};
    // After a direct-route failure, retry LOCATE+direct no sooner than this.
    std::chrono::milliseconds reprobe_interval{10000};
    std::chrono::milliseconds idle_close{60000};
    size_t dedup_window = 4096;
    DepotOptions depot;
};

// Distributed exchange binding: hybrid messaging (direct sockets preferred,
// store relay as fallback) with per-peer route caching, a relay long-poller,
// at-most-once delivery via a per-sender dedup window, and an attached
// object depot serving peer fetches on the same listener.
class DistExchange : public ExchangeClient {
public:
    // Registers a fresh id.
    static std::unique_ptr<DistExchange> connect(const net::Endpoint& store, EntityRole role,
                                                 std::optional<BehaviorSpec> spec = std::nullopt,
                                                 DistOptions options = {});
    // Binds an id that is already registered (reconnect / child process).
    static std::unique_ptr<DistExchange> attach(const net::Endpoint& store, const EntityId& id,
                                                DistOptions options = {});

    ~DistExchange() override;

    const EntityId& id() const override { return id_; }
    void send(const Envelope& e) override;
    Envelope recv(std::chrono::milliseconds timeout) override;
    void close(const EntityId& target) override;
    std::vector<EntityId> discover(std::string_view behavior_name) override;
    ObjectDepot* depot() override { return depot_.get(); }

    std::optional<std::string> direct_endpoint() const;
    relay::RelayClient& store_client() { return *control_; }

    struct Counters {
        uint64_t direct_sends = 0;
        uint64_t relay_sends = 0;
        uint64_t direct_failures = 0;
        uint64_t duplicates_dropped = 0;
        relay::RelayClient::Counters control;
        relay::RelayClient::Counters poller;
        relay::RelayClient::Counters data;
    };
    Counters counters() const;

private:
    DistExchange(const net::Endpoint& store, EntityId id, DistOptions options);
    void start(const std::optional<BehaviorSpec>& spec, bool fresh);

    struct Route {
        enum class Kind { Direct, Relay } kind = Kind::Relay;
        net::Endpoint endpoint;
        std::chrono::steady_clock::time_point demoted_at{};
    };

    struct PooledConn {
        std::mutex mu;
        net::Socket socket;
        net::Endpoint endpoint;
        std::chrono::steady_clock::time_point last_used;
    };

    bool try_direct(const net::Endpoint& ep, const Bytes& frame);
    void enqueue_incoming(Envelope e);
    void poll_loop();
    void accept_loop();
    void peer_session(net::Socket sock);
    void sweep_idle_connections();
    bool interruptible_sleep(uint32_t ms);
    relay::RelayClient& data_client();

    EntityId id_;
    DistOptions options_;
    net::Endpoint store_;

    std::unique_ptr<relay::RelayClient> control_;
    std::unique_ptr<relay::RelayClient> poller_client_;
    std::unique_ptr<relay::RelayClient> data_client_;
    std::once_flag data_once_;

    std::unique_ptr<ObjectDepot> depot_;

    net::Listener listener_;
    std::thread acceptor_;
    std::thread poller_;
    std::atomic<bool> stopping_{false};

    std::mutex sessions_mu_;
    std::list<std::thread> sessions_;

    std::mutex routes_mu_;
    std::unordered_map<EntityId, Route> routes_;

    std::mutex pool_mu_;
    std::unordered_map<std::string, std::shared_ptr<PooledConn>> conns_;

    // Merged inbound queue (direct stream + relay poller).
    std::mutex in_mu_;
    std::condition_variable in_cv_;
    std::deque<Envelope> incoming_;
    bool own_closed_ = false;

    struct DedupWindow {
        std::unordered_set<Uuid128> seen;
        std::deque<Uuid128> order;
    };
    std::unordered_map<EntityId, DedupWindow> dedup_;  // guarded by in_mu_

    std::atomic<uint64_t> direct_sends_{0};
    std::atomic<uint64_t> relay_sends_{0};
    std::atomic<uint64_t> direct_failures_{0};
    std::atomic<uint64_t> duplicates_dropped_{0};
};

// ExchangeHub over a relay store: register/bind produce DistExchange
// bindings; launchers read store_endpoint() to point children at it.
class DistHub : public ExchangeHub {
public:
    explicit DistHub(net::Endpoint store, DistOptions options = {});

    EntityId register_entity(EntityRole role,
                             std::optional<BehaviorSpec> spec = std::nullopt) override;
    std::unique_ptr<ExchangeClient> bind(const EntityId& id) override;
    void close(const EntityId& id) override;
    std::vector<EntityId> discover(std::string_view behavior_name) override;
    std::optional<std::string> store_endpoint() const override { return store_.to_string(); }

    const DistOptions& options() const { return options_; }

private:
    net::Endpoint store_;
    DistOptions options_;
    std::mutex mu_;
    relay::RelayClient control_;
};

}  // namespace agentry
