#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "agentry/bytes.hpp"
#include "agentry/completion.hpp"
#include "agentry/errors.hpp"
#include "agentry/ids.hpp"
#include "agentry/payload.hpp"

namespace agentry {

std::array<uint8_t, 32> sha256(const Bytes& bytes);

struct DepotOptions {
    size_t cache_budget_bytes = 256ull << 20;
    std::chrono::milliseconds ref_ttl = std::chrono::hours(1);
    size_t inline_threshold = 100 * 1024;
};

// Transport hooks the depot uses to reach remote objects. All optional; a
// depot without hooks serves and resolves purely from local memory.
struct DepotRemote {
    // Fetch object bytes from a peer endpoint ("host:port").
    std::function<std::optional<Bytes>(const std::string& endpoint, const Uuid128& object_id)>
        peer_fetch;
    std::function<void(const std::string& key, const Bytes& bytes)> store_put;
    std::function<std::optional<Bytes>(const std::string& key)> store_get;
    // Endpoint peers can fetch from, when this process is reachable.
    std::function<std::optional<std::string>()> serve_endpoint;
    EntityId self;
};

struct FetchOutcome {
    bool ok = false;
    bool integrity_failure = false;
    Bytes bytes;
    std::string error;
};

using FetchFuture = std::shared_ptr<Completion<FetchOutcome>>;

// Pass-by-reference data plane. proxy() pins bytes locally and returns a
// small descriptor; resolve() brings the bytes back via location hints
// (peer fetch first, object store fallback) with checksum verification and
// an LRU-bounded local cache. Concurrent resolves of one object coalesce
// into a single fetch. Internally synchronized.
class ObjectDepot {
public:
    explicit ObjectDepot(DepotOptions options, DepotRemote remote = {});
    ~ObjectDepot();

    ObjectDepot(const ObjectDepot&) = delete;
    ObjectDepot& operator=(const ObjectDepot&) = delete;

    ProxyRef proxy(Bytes bytes);

    // Throws TransportError when every location fails, IntegrityError on
    // checksum mismatch.
    Bytes resolve(const ProxyRef& ref);
    FetchFuture resolve_async(const ProxyRef& ref);

    // Inline below the threshold, Reference(proxy(bytes)) at or above it.
    Payload auto_payload(Bytes bytes, std::optional<size_t> threshold = std::nullopt);

    // Inline payload -> its bytes; Reference -> resolve.
    Bytes materialize(const Payload& p);

    // Unpins a proxied object; its cache entry becomes evictable.
    void release(const Uuid128& object_id);

    // Lookup for serving peer fetches; nullopt when absent or expired.
    std::optional<Bytes> serve_lookup(const Uuid128& object_id);

    // Drops remote hooks and waits for in-flight fetches; the owner of the
    // hooks calls this before tearing down its transport.
    void detach_remote();

    static std::string store_key_for(const Uuid128& object_id);
    static Bytes unwrap(const FetchOutcome& o);

    struct Counters {
        uint64_t cache_hits = 0;
        uint64_t fetches = 0;
        uint64_t peer_fetches = 0;
        uint64_t store_fetches = 0;
    };
    Counters counters() const;

    size_t cached_bytes() const;
    const DepotOptions& options() const { return options_; }

private:
    struct Entry {
        Bytes bytes;
        bool pinned = false;
        std::chrono::steady_clock::time_point pin_expiry{};
        std::list<Uuid128>::iterator lru_pos;
        bool in_lru = false;
    };

    void insert_cached(const Uuid128& id, Bytes bytes, bool pinned);
    void evict_to_budget();
    std::optional<Bytes> lookup(const Uuid128& id, bool count_hit);
    FetchOutcome fetch_remote(const ProxyRef& ref);

    DepotOptions options_;

    mutable std::mutex mu_;
    DepotRemote remote_;
    bool remote_detached_ = false;
    std::unordered_map<Uuid128, Entry> entries_;
    std::list<Uuid128> lru_;  // front = most recent
    size_t unpinned_bytes_ = 0;
    std::unordered_map<Uuid128, FetchFuture> inflight_;
    int active_fetches_ = 0;
    std::condition_variable fetch_idle_;

    std::atomic<uint64_t> cache_hits_{0};
    std::atomic<uint64_t> fetches_{0};
    std::atomic<uint64_t> peer_fetches_{0};
    std::atomic<uint64_t> store_fetches_{0};
};

}  // namespace agentry
