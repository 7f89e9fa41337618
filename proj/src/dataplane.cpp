#include "agentry/dataplane.hpp"

#include <openssl/evp.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "agentry/log.hpp"

namespace agentry {

std::array<uint8_t, 32> sha256(const Bytes& bytes) {
    std::array<uint8_t, 32> out{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr);
    return out;
}

ObjectDepot::ObjectDepot(DepotOptions options, DepotRemote remote)
    : options_(options), remote_(std::move(remote)) {}

ObjectDepot::~ObjectDepot() {
    detach_remote();
}

std::string ObjectDepot::store_key_for(const Uuid128& object_id) {
    return "obj/" + object_id.to_string();
}

Bytes ObjectDepot::unwrap(const FetchOutcome& o) {
    if (o.ok) return o.bytes;
    if (o.integrity_failure) throw IntegrityError(o.error);
    throw TransportError(o.error);
}

ProxyRef ObjectDepot::proxy(Bytes bytes) {
    ProxyRef ref;
    ref.object_id = Uuid128::random();
    ref.size = bytes.size();
    ref.checksum = sha256(bytes);

    std::optional<std::string> endpoint;
    {
        std::lock_guard lock(mu_);
        ref.origin = remote_.self;
        if (!remote_detached_ && remote_.serve_endpoint) endpoint = remote_.serve_endpoint();
    }
    if (endpoint) {
        ref.locations.push_back({ProxyLocation::Kind::Peer, *endpoint});
    } else {
        // Unreachable owner: publish a store copy so peers can still fetch.
        std::function<void(const std::string&, const Bytes&)> put;
        {
            std::lock_guard lock(mu_);
            if (!remote_detached_) put = remote_.store_put;
        }
        if (put) {
            std::string key = store_key_for(ref.object_id);
            put(key, bytes);
            ref.locations.push_back({ProxyLocation::Kind::StoreKey, key});
        }
    }

    insert_cached(ref.object_id, std::move(bytes), /*pinned=*/true);
    return ref;
}

void ObjectDepot::insert_cached(const Uuid128& id, Bytes bytes, bool pinned) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it != entries_.end()) {
        if (pinned && !it->second.pinned) {
            if (it->second.in_lru) {
                lru_.erase(it->second.lru_pos);
                it->second.in_lru = false;
                unpinned_bytes_ -= it->second.bytes.size();
            }
            it->second.pinned = true;
            it->second.pin_expiry = std::chrono::steady_clock::now() + options_.ref_ttl;
        }
        return;
    }
    Entry e;
    e.bytes = std::move(bytes);
    e.pinned = pinned;
    if (pinned) {
        e.pin_expiry = std::chrono::steady_clock::now() + options_.ref_ttl;
    } else {
        lru_.push_front(id);
        e.lru_pos = lru_.begin();
        e.in_lru = true;
        unpinned_bytes_ += e.bytes.size();
    }
    entries_.emplace(id, std::move(e));
    evict_to_budget();
}

void ObjectDepot::evict_to_budget() {
    // mu_ held. Expired pins downgrade to evictable cache entries first.
    auto now = std::chrono::steady_clock::now();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->second.pinned && it->second.pin_expiry <= now) {
            it->second.pinned = false;
            lru_.push_back(it->first);
            it->second.lru_pos = std::prev(lru_.end());
            it->second.in_lru = true;
            unpinned_bytes_ += it->second.bytes.size();
        }
    }
    while (unpinned_bytes_ > options_.cache_budget_bytes && !lru_.empty()) {
        Uuid128 victim = lru_.back();
        lru_.pop_back();
        auto it = entries_.find(victim);
        if (it != entries_.end()) {
            unpinned_bytes_ -= it->second.bytes.size();
            entries_.erase(it);
        }
    }
}

std::optional<Bytes> ObjectDepot::lookup(const Uuid128& id, bool count_hit) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    if (it->second.pinned && it->second.pin_expiry <= std::chrono::steady_clock::now()) {
        return std::nullopt;
    }
    if (it->second.in_lru) {
        lru_.erase(it->second.lru_pos);
        lru_.push_front(id);
        it->second.lru_pos = lru_.begin();
    }
    if (count_hit) cache_hits_.fetch_add(1, std::memory_order_relaxed);
    return it->second.bytes;
}

std::optional<Bytes> ObjectDepot::serve_lookup(const Uuid128& object_id) {
    return lookup(object_id, /*count_hit=*/false);
}

void ObjectDepot::release(const Uuid128& object_id) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(object_id);
    if (it == entries_.end() || !it->second.pinned) return;
    it->second.pinned = false;
    lru_.push_back(object_id);
    it->second.lru_pos = std::prev(lru_.end());
    it->second.in_lru = true;
    unpinned_bytes_ += it->second.bytes.size();
    evict_to_budget();
}

FetchOutcome ObjectDepot::fetch_remote(const ProxyRef& ref) {
    fetches_.fetch_add(1, std::memory_order_relaxed);
    std::string last_error = "no usable location hints";
    for (const auto& loc : ref.locations) {
        std::optional<Bytes> got;
        try {
            if (loc.kind == ProxyLocation::Kind::Peer) {
                std::function<std::optional<Bytes>(const std::string&, const Uuid128&)> fetch;
                {
                    std::lock_guard lock(mu_);
                    if (!remote_detached_) fetch = remote_.peer_fetch;
                }
                if (!fetch) continue;
                peer_fetches_.fetch_add(1, std::memory_order_relaxed);
                got = fetch(loc.text, ref.object_id);
            } else {
                std::function<std::optional<Bytes>(const std::string&)> get;
                {
                    std::lock_guard lock(mu_);
                    if (!remote_detached_) get = remote_.store_get;
                }
                if (!get) continue;
                store_fetches_.fetch_add(1, std::memory_order_relaxed);
                got = get(loc.text);
            }
        } catch (const std::exception& e) {
            last_error = e.what();
            continue;
        }
        if (!got) {
            last_error = "object not found at " + loc.text;
            continue;
        }
        if (sha256(*got) != ref.checksum) {
            FetchOutcome bad;
            bad.integrity_failure = true;
            bad.error = "checksum mismatch for object " + ref.object_id.to_string() + " from " +
                        loc.text;
            return bad;
        }
        FetchOutcome out;
        out.ok = true;
        out.bytes = std::move(*got);
        return out;
    }
    FetchOutcome fail;
    fail.error = "cannot resolve object " + ref.object_id.to_string() + ": " + last_error;
    return fail;
}

FetchFuture ObjectDepot::resolve_async(const ProxyRef& ref) {
    if (auto cached = lookup(ref.object_id, /*count_hit=*/true)) {
        auto done = std::make_shared<Completion<FetchOutcome>>();
        FetchOutcome out;
        out.ok = true;
        out.bytes = std::move(*cached);
        done->resolve(std::move(out));
        return done;
    }

    FetchFuture fut;
    bool leader = false;
    {
        std::lock_guard lock(mu_);
        auto it = inflight_.find(ref.object_id);
        if (it != inflight_.end()) {
            fut = it->second;  // coalesce onto the in-flight fetch
        } else {
            fut = std::make_shared<Completion<FetchOutcome>>();
            inflight_.emplace(ref.object_id, fut);
            ++active_fetches_;
            leader = true;
        }
    }
    if (!leader) return fut;

    std::thread([this, ref, fut] {
        FetchOutcome out = fetch_remote(ref);
        if (out.ok) {
            insert_cached(ref.object_id, out.bytes, /*pinned=*/false);
        }
        {
            std::lock_guard lock(mu_);
            inflight_.erase(ref.object_id);
            --active_fetches_;
        }
        fetch_idle_.notify_all();
        fut->resolve(std::move(out));
    }).detach();
    return fut;
}

Bytes ObjectDepot::resolve(const ProxyRef& ref) {
    return unwrap(resolve_async(ref)->wait());
}

Payload ObjectDepot::auto_payload(Bytes bytes, std::optional<size_t> threshold) {
    size_t limit = threshold.value_or(options_.inline_threshold);
    if (bytes.size() < limit) return Payload::inline_bytes(std::move(bytes));
    return Payload::reference(proxy(std::move(bytes)));
}

Bytes ObjectDepot::materialize(const Payload& p) {
    if (p.is_inline()) return p.bytes();
    return resolve(p.ref());
}

void ObjectDepot::detach_remote() {
    std::unique_lock lock(mu_);
    remote_detached_ = true;
    fetch_idle_.wait(lock, [&] { return active_fetches_ == 0; });
    remote_ = DepotRemote{};
}

ObjectDepot::Counters ObjectDepot::counters() const {
    Counters c;
    c.cache_hits = cache_hits_.load(std::memory_order_relaxed);
    c.fetches = fetches_.load(std::memory_order_relaxed);
    c.peer_fetches = peer_fetches_.load(std::memory_order_relaxed);
    c.store_fetches = store_fetches_.load(std::memory_order_relaxed);
    return c;
}

size_t ObjectDepot::cached_bytes() const {
    std::lock_guard lock(mu_);
    size_t total = 0;
    for (const auto& [_, e] : entries_) total += e.bytes.size();
    return total;
}

}  // namespace agentry
