#include <doctest.h>

#include <thread>

#include "agentry/dataplane.hpp"
#include "agentry/dist_exchange.hpp"
#include "agentry/relay/server.hpp"
#include "helpers.hpp"

using namespace agentry;
using namespace std::chrono_literals;
using agentry::testing::EnvelopeGen;

namespace {

Bytes random_bytes(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bytes out(n);
    for (auto& b : out) b = static_cast<uint8_t>(rng());
    return out;
}

}  // namespace

TEST_CASE("resolve after proxy is the identity, across sizes") {
    ObjectDepot depot(DepotOptions{});
    for (size_t size : {size_t{0}, size_t{1}, size_t{100}, size_t{100 * 1024}, size_t{3u << 20},
                        size_t{32u << 20}}) {
        Bytes data = random_bytes(size, size + 1);
        ProxyRef ref = depot.proxy(data);
        CHECK(ref.size == size);
        CHECK(encode_proxy_ref(ref).size() <= ProxyRef::kMaxEncodedSize);
        CHECK(depot.resolve(ref) == data);
    }
    // Local resolves are pin hits: no fetches at all.
    CHECK(depot.counters().fetches == 0);
    CHECK(depot.counters().cache_hits >= 5);
}

TEST_CASE("two proxies of identical bytes get distinct object ids") {
    ObjectDepot depot(DepotOptions{});
    Bytes data = random_bytes(1024, 7);
    CHECK(depot.proxy(data).object_id != depot.proxy(data).object_id);
}

TEST_CASE("proxying a 10 MB value yields a reference under 512 bytes") {
    ObjectDepot depot(DepotOptions{});
    ProxyRef ref = depot.proxy(random_bytes(10u << 20, 11));
    CHECK(encode_proxy_ref(ref).size() < 512);
}

TEST_CASE("auto payload splits on the threshold") {
    ObjectDepot depot(DepotOptions{});
    CHECK(depot.auto_payload(Bytes(10, 1)).is_inline());
    CHECK(depot.auto_payload(Bytes(10u << 20, 1)).is_reference());
    // Boundary: at the threshold it becomes a reference.
    CHECK(depot.auto_payload(Bytes(100 * 1024 - 1, 1)).is_inline());
    CHECK(depot.auto_payload(Bytes(100 * 1024, 1)).is_reference());
    // Explicit threshold override.
    CHECK(depot.auto_payload(Bytes(64, 1), 16).is_reference());
}

TEST_CASE("resolve follows location hints in order with store fallback") {
    // Owner-side store emulated with plain maps; peer endpoint is dead.
    std::map<std::string, Bytes> store;
    DepotRemote remote;
    remote.self = EntityId::random(EntityRole::Agent);
    remote.peer_fetch = [](const std::string&, const Uuid128&) -> std::optional<Bytes> {
        throw TransportError("peer unreachable");
    };
    remote.store_get = [&store](const std::string& key) -> std::optional<Bytes> {
        auto it = store.find(key);
        if (it == store.end()) return std::nullopt;
        return it->second;
    };
    ObjectDepot reader(DepotOptions{}, std::move(remote));

    Bytes data = random_bytes(50000, 13);
    ProxyRef ref;
    ref.object_id = Uuid128::random();
    ref.size = data.size();
    ref.origin = EntityId::random(EntityRole::Agent);
    ref.checksum = sha256(data);
    ref.locations.push_back({ProxyLocation::Kind::Peer, "127.0.0.1:1"});
    ref.locations.push_back({ProxyLocation::Kind::StoreKey, "obj/x"});
    store["obj/x"] = data;

    CHECK(reader.resolve(ref) == data);
    auto counters = reader.counters();
    CHECK(counters.peer_fetches == 1);
    CHECK(counters.store_fetches == 1);

    // Second resolve hits the local cache.
    CHECK(reader.resolve(ref) == data);
    CHECK(reader.counters().fetches == 1);
}

TEST_CASE("checksum mismatches are integrity errors") {
    DepotRemote remote;
    remote.self = EntityId::random(EntityRole::Agent);
    remote.store_get = [](const std::string&) -> std::optional<Bytes> {
        return Bytes(100, 0xEE);  // wrong content
    };
    ObjectDepot reader(DepotOptions{}, std::move(remote));

    Bytes data = random_bytes(100, 17);
    ProxyRef ref;
    ref.object_id = Uuid128::random();
    ref.size = data.size();
    ref.origin = EntityId::random(EntityRole::Agent);
    ref.checksum = sha256(data);
    ref.locations.push_back({ProxyLocation::Kind::StoreKey, "obj/bad"});
    CHECK_THROWS_AS(reader.resolve(ref), IntegrityError);
}

TEST_CASE("resolving with no usable location fails as transport error") {
    ObjectDepot depot(DepotOptions{});
    ProxyRef ref;
    ref.object_id = Uuid128::random();
    ref.size = 5;
    ref.origin = EntityId::random(EntityRole::Agent);
    CHECK_THROWS_AS(depot.resolve(ref), TransportError);
}

TEST_CASE("concurrent resolves of one object coalesce into one fetch") {
    std::atomic<int> fetches{0};
    Bytes data = random_bytes(200000, 19);
    DepotRemote remote;
    remote.self = EntityId::random(EntityRole::Client);
    remote.store_get = [&](const std::string&) -> std::optional<Bytes> {
        ++fetches;
        std::this_thread::sleep_for(150ms);
        return data;
    };
    ObjectDepot reader(DepotOptions{}, std::move(remote));

    ProxyRef ref;
    ref.object_id = Uuid128::random();
    ref.size = data.size();
    ref.origin = EntityId::random(EntityRole::Agent);
    ref.checksum = sha256(data);
    ref.locations.push_back({ProxyLocation::Kind::StoreKey, "obj/big"});

    auto f1 = reader.resolve_async(ref);
    auto f2 = reader.resolve_async(ref);
    CHECK(ObjectDepot::unwrap(f1->wait()) == data);
    CHECK(ObjectDepot::unwrap(f2->wait()) == data);
    CHECK(fetches == 1);
    CHECK(reader.counters().fetches == 1);
}

TEST_CASE("async resolution overlaps with local work") {
    Bytes data = random_bytes(1 << 20, 23);
    DepotRemote remote;
    remote.self = EntityId::random(EntityRole::Client);
    remote.store_get = [&](const std::string&) -> std::optional<Bytes> {
        std::this_thread::sleep_for(120ms);  // slow link
        return data;
    };
    ObjectDepot reader(DepotOptions{}, std::move(remote));
    ProxyRef ref;
    ref.object_id = Uuid128::random();
    ref.size = data.size();
    ref.origin = EntityId::random(EntityRole::Agent);
    ref.checksum = sha256(data);
    ref.locations.push_back({ProxyLocation::Kind::StoreKey, "obj/slow"});

    auto started = std::chrono::steady_clock::now();
    auto future = reader.resolve_async(ref);
    std::this_thread::sleep_for(100ms);  // "compute"
    Bytes got = ObjectDepot::unwrap(future->wait());
    double overlap_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    CHECK(got == data);
    // Sequential would be ~220 ms; overlapped stays near max(120, 100).
    CHECK(overlap_ms < 200.0);

    // A cached ref resolves asynchronously and immediately.
    auto cached = reader.resolve_async(ref);
    CHECK(cached->resolved());
}

TEST_CASE("pinned objects survive cache pressure; released ones are evicted") {
    DepotOptions options;
    options.cache_budget_bytes = 256 * 1024;
    ObjectDepot depot(options);

    Bytes pinned_data = random_bytes(100 * 1024, 29);
    ProxyRef pinned = depot.proxy(pinned_data);

    // Unpinned cache entries well past the budget.
    for (int i = 0; i < 8; ++i) {
        Bytes blob = random_bytes(64 * 1024, 100 + static_cast<uint64_t>(i));
        ProxyRef r = depot.proxy(blob);
        depot.release(r.object_id);
    }
    CHECK(depot.cached_bytes() <= options.cache_budget_bytes + pinned_data.size());

    // The pinned object is still served and resolvable locally.
    CHECK(depot.serve_lookup(pinned.object_id).has_value());
    CHECK(depot.resolve(pinned) == pinned_data);
}

TEST_CASE("expired pins are no longer served") {
    DepotOptions options;
    options.ref_ttl = 80ms;
    ObjectDepot depot(options);
    ProxyRef ref = depot.proxy(random_bytes(1000, 31));
    CHECK(depot.serve_lookup(ref.object_id).has_value());
    std::this_thread::sleep_for(150ms);
    CHECK_FALSE(depot.serve_lookup(ref.object_id).has_value());
}

TEST_CASE("peer fetch across two dist exchanges round-trips bytes") {
    relay::RelayServerOptions so;
    so.port = 0;
    relay::RelayServer server(so);
    server.start();

    auto owner = DistExchange::connect(server.endpoint(), EntityRole::Client);
    auto reader = DistExchange::connect(server.endpoint(), EntityRole::Agent);

    Bytes data = random_bytes(5u << 20, 37);
    ProxyRef ref = owner->depot()->proxy(data);
    REQUIRE(ref.locations.size() == 1);
    CHECK(ref.locations[0].kind == ProxyLocation::Kind::Peer);

    CHECK(reader->depot()->resolve(ref) == data);
    CHECK(reader->depot()->counters().peer_fetches == 1);

    server.stop();
}

TEST_CASE("an unreachable owner publishes a store copy instead") {
    relay::RelayServerOptions so;
    so.port = 0;
    relay::RelayServer server(so);
    server.start();

    DistOptions nat;
    nat.direct_listen = false;
    auto owner = DistExchange::connect(server.endpoint(), EntityRole::Client, std::nullopt, nat);
    auto reader = DistExchange::connect(server.endpoint(), EntityRole::Agent);

    Bytes data = random_bytes(300000, 41);
    ProxyRef ref = owner->depot()->proxy(data);
    REQUIRE(ref.locations.size() == 1);
    CHECK(ref.locations[0].kind == ProxyLocation::Kind::StoreKey);

    CHECK(reader->depot()->resolve(ref) == data);
    CHECK(reader->depot()->counters().store_fetches == 1);
    server.stop();
}

TEST_CASE("a dead owner with a store fallback hint still resolves") {
    relay::RelayServerOptions so;
    so.port = 0;
    relay::RelayServer server(so);
    server.start();

    auto owner = DistExchange::connect(server.endpoint(), EntityRole::Client);
    auto reader = DistExchange::connect(server.endpoint(), EntityRole::Agent);

    Bytes data = random_bytes(200000, 43);
    ProxyRef ref = owner->depot()->proxy(data);

    // Manually publish a store copy, as a durable-handoff caller would.
    relay::RelayClient store_client(server.endpoint());
    store_client.obj_put(ObjectDepot::store_key_for(ref.object_id), data);
    ref.locations.push_back(
        {ProxyLocation::Kind::StoreKey, ObjectDepot::store_key_for(ref.object_id)});

    owner.reset();  // owner dies: the peer hint goes dark

    CHECK(reader->depot()->resolve(ref) == data);
    auto counters = reader->depot()->counters();
    CHECK(counters.peer_fetches == 1);   // tried and failed
    CHECK(counters.store_fetches == 1);  // fallback succeeded
    server.stop();
}
