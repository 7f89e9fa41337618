#pragma once

#include <array>
#include <atomic>
#include <mutex>
#include <optional>
#include <vector>

#include "agentry/behavior.hpp"
#include "agentry/net.hpp"
#include "agentry/relay/protocol.hpp"

namespace agentry::relay {

// Typed client for the relay-store protocol. One connection, lockstep
// request/response, lazily (re)connected; safe for concurrent callers.
// Long polls hold the connection, so give pollers their own client.
class RelayClient {
public:
    explicit RelayClient(net::Endpoint store,
                         std::chrono::milliseconds connect_timeout = std::chrono::seconds(5));

    const net::Endpoint& store() const { return store_; }

    // Status::Ok or Status::AlreadyExists; anything else throws.
    Status register_entity(const EntityId& id, const std::optional<BehaviorSpec>& spec);

    void advertise(const EntityId& id, const std::string& endpoint);

    struct LocateResult {
        bool closed = false;
        std::optional<std::string> endpoint;
    };
    LocateResult locate(const EntityId& id);

    // Throws MailboxClosedError / UnknownEntityError.
    void put_msg(const EntityId& dest, const Bytes& envelope_frame);

    // Long-polls up to `wait`; empty result on expiry. Throws
    // MailboxClosedError once the mailbox is closed and drained.
    std::vector<Bytes> poll_msgs(const EntityId& id, uint32_t max, std::chrono::milliseconds wait);

    void close_entity(const EntityId& id);
    std::vector<EntityId> discover(const std::string& behavior_name);

    void obj_put(const std::string& key, const Bytes& bytes,
                 std::optional<std::chrono::milliseconds> ttl = std::nullopt);
    std::optional<Bytes> obj_get(const std::string& key);
    bool obj_del(const std::string& key);

    std::string stats_json();

    struct Counters {
        uint64_t ops = 0;
        uint64_t bytes_sent = 0;
        uint64_t bytes_received = 0;
        uint64_t put_msgs = 0;
        uint64_t put_msg_bytes = 0;
        uint64_t polls = 0;
        uint64_t obj_gets = 0;
        uint64_t obj_puts = 0;
    };
    Counters counters() const;

private:
    struct Reply {
        Status status;
        Bytes frame;   // full response frame
        size_t body_offset;  // first field byte
    };
    Reply roundtrip(const Bytes& request, std::chrono::milliseconds read_timeout);
    void ensure_connected();

    net::Endpoint store_;
    std::chrono::milliseconds connect_timeout_;
    std::mutex mu_;
    net::Socket conn_;

    std::atomic<uint64_t> ops_{0};
    std::atomic<uint64_t> bytes_sent_{0};
    std::atomic<uint64_t> bytes_received_{0};
    std::atomic<uint64_t> put_msgs_{0};
    std::atomic<uint64_t> put_msg_bytes_{0};
    std::atomic<uint64_t> polls_{0};
    std::atomic<uint64_t> obj_gets_{0};
    std::atomic<uint64_t> obj_puts_{0};
};

}  // namespace agentry::relay
