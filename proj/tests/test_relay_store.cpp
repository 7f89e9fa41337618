#include <doctest.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "agentry/relay/client.hpp"
#include "agentry/relay/server.hpp"
#include "helpers.hpp"

using namespace agentry;
using namespace agentry::relay;
using namespace std::chrono_literals;
using agentry::testing::TempDir;

namespace {

struct ServerFixture {
    RelayServer server;

    explicit ServerFixture(RelayServerOptions options = make_default()) : server(options) {
        server.start();
    }
    ~ServerFixture() { server.stop(); }

    static RelayServerOptions make_default() {
        RelayServerOptions o;
        o.port = 0;
        return o;
    }

    RelayClient client() { return RelayClient(server.endpoint()); }
};

BehaviorSpec spec_named(const std::string& name) {
    BehaviorSpec s;
    s.name = name;
    s.ancestry = {name};
    return s;
}

Bytes frame_of(const std::string& text) {
    Envelope e;
    e.src = EntityId::random(EntityRole::Client);
    e.dest = EntityId::random(EntityRole::Agent);
    e.message_id = Uuid128::random();
    e.body = ActionRequestBody{"note", Payload::inline_text(text)};
    return encode_envelope(e);
}

}  // namespace

TEST_CASE("register is idempotent-with-report") {
    ServerFixture fx;
    auto c = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);
    CHECK(c.register_entity(id, std::nullopt) == Status::Ok);
    CHECK(c.register_entity(id, std::nullopt) == Status::AlreadyExists);
}

TEST_CASE("advertise then locate round-trips; re-advertise overwrites") {
    ServerFixture fx;
    auto c = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);

    CHECK_THROWS_AS(c.advertise(id, "127.0.0.1:9"), UnknownEntityError);
    c.register_entity(id, std::nullopt);

    CHECK_FALSE(c.locate(id).endpoint.has_value());  // none before advertise
    c.advertise(id, "127.0.0.1:4100");
    CHECK(c.locate(id).endpoint == "127.0.0.1:4100");
    c.advertise(id, "127.0.0.1:4200");
    CHECK(c.locate(id).endpoint == "127.0.0.1:4200");

    c.close_entity(id);
    CHECK(c.locate(id).closed);
}

TEST_CASE("mailbox relay is FIFO and closed-aware") {
    ServerFixture fx;
    auto c = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);
    c.register_entity(id, std::nullopt);

    std::vector<Bytes> sent;
    for (int i = 0; i < 100; ++i) {
        sent.push_back(frame_of("m" + std::to_string(i)));
        c.put_msg(id, sent.back());
    }

    SUBCASE("polled in order, max respected") {
        auto first = c.poll_msgs(id, 1, 0ms);
        REQUIRE(first.size() == 1);
        CHECK(first[0] == sent[0]);
        auto second = c.poll_msgs(id, 1, 0ms);
        REQUIRE(second.size() == 1);
        CHECK(second[0] == sent[1]);
        auto rest = c.poll_msgs(id, 1000, 0ms);
        CHECK(rest.size() == 98);
    }

    SUBCASE("put to closed reports closed; drain then closed raises") {
        c.close_entity(id);
        CHECK_THROWS_AS(c.put_msg(id, frame_of("x")), MailboxClosedError);
        auto drained = c.poll_msgs(id, 1000, 0ms);
        CHECK(drained.size() == 100);
        CHECK_THROWS_AS(c.poll_msgs(id, 10, 0ms), MailboxClosedError);
    }
}

TEST_CASE("put to unknown entity fails") {
    ServerFixture fx;
    auto c = fx.client();
    CHECK_THROWS_AS(c.put_msg(EntityId::random(EntityRole::Agent), frame_of("x")),
                    UnknownEntityError);
}

TEST_CASE("empty poll with no wait returns immediately") {
    ServerFixture fx;
    auto c = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);
    c.register_entity(id, std::nullopt);
    auto started = std::chrono::steady_clock::now();
    CHECK(c.poll_msgs(id, 10, 0ms).empty());
    CHECK(std::chrono::steady_clock::now() - started < 1s);
}

TEST_CASE("long poll returns early when a message arrives") {
    ServerFixture fx;
    auto poller = fx.client();
    auto sender = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);
    poller.register_entity(id, std::nullopt);

    Bytes payload = frame_of("wake");
    std::thread t([&] {
        std::this_thread::sleep_for(100ms);
        sender.put_msg(id, payload);
    });
    auto started = std::chrono::steady_clock::now();
    auto got = poller.poll_msgs(id, 10, 5s);
    auto waited = std::chrono::steady_clock::now() - started;
    t.join();
    REQUIRE(got.size() == 1);
    CHECK(got[0] == payload);
    CHECK(waited >= 80ms);
    CHECK(waited < 2s);
}

TEST_CASE("discovery matches ancestry through the wire") {
    ServerFixture fx;
    auto c = fx.client();
    EntityId folder = EntityId::random(EntityRole::Agent);
    EntityId open_folder = EntityId::random(EntityRole::Agent);
    c.register_entity(folder, spec_named("ProteinFolder"));
    BehaviorSpec open_spec = spec_named("OpenProteinFolder");
    open_spec.ancestry.push_back("ProteinFolder");
    c.register_entity(open_folder, open_spec);

    auto both = c.discover("ProteinFolder");
    std::sort(both.begin(), both.end());
    std::vector<EntityId> expected{folder, open_folder};
    std::sort(expected.begin(), expected.end());
    CHECK(both == expected);
    CHECK(c.discover("OpenProteinFolder") == std::vector<EntityId>{open_folder});
    CHECK(c.discover("Nothing").empty());
}

TEST_CASE("object store puts, gets, deletes and expires") {
    ServerFixture fx;
    auto c = fx.client();

    CHECK_FALSE(c.obj_get("missing").has_value());
    Bytes blob = testing::EnvelopeGen(42).bytes(4096);
    c.obj_put("k1", blob);
    CHECK(c.obj_get("k1") == blob);
    CHECK(c.obj_del("k1"));
    CHECK_FALSE(c.obj_del("k1"));
    CHECK_FALSE(c.obj_get("k1").has_value());

    c.obj_put("ttl", blob, 150ms);
    CHECK(c.obj_get("ttl").has_value());
    std::this_thread::sleep_for(250ms);
    CHECK_FALSE(c.obj_get("ttl").has_value());
}

TEST_CASE("registry, specs and pending messages survive a restart; endpoints do not") {
    TempDir dir;
    RelayServerOptions options;
    options.port = 0;
    options.data_dir = dir.path;

    EntityId id = EntityId::random(EntityRole::Agent);
    Bytes m1 = frame_of("persist-1");
    Bytes m2 = frame_of("persist-2");
    {
        RelayServer server(options);
        server.start();
        RelayClient c(server.endpoint());
        c.register_entity(id, spec_named("Keeper"));
        c.advertise(id, "127.0.0.1:5000");
        c.put_msg(id, m1);
        c.put_msg(id, m2);
        server.stop();
    }
    {
        RelayServer server(options);
        server.start();
        RelayClient c(server.endpoint());
        CHECK(c.register_entity(id, std::nullopt) == Status::AlreadyExists);
        CHECK(c.discover("Keeper") == std::vector<EntityId>{id});
        // Stale routes must re-advertise.
        CHECK_FALSE(c.locate(id).endpoint.has_value());
        auto msgs = c.poll_msgs(id, 10, 0ms);
        REQUIRE(msgs.size() == 2);
        CHECK(msgs[0] == m1);
        CHECK(msgs[1] == m2);
        server.stop();
    }
}

TEST_CASE("consumed messages stay consumed across restarts") {
    TempDir dir;
    RelayServerOptions options;
    options.port = 0;
    options.data_dir = dir.path;
    EntityId id = EntityId::random(EntityRole::Agent);
    Bytes m1 = frame_of("gone");
    Bytes m2 = frame_of("kept");
    {
        RelayServer server(options);
        server.start();
        RelayClient c(server.endpoint());
        c.register_entity(id, std::nullopt);
        c.put_msg(id, m1);
        c.put_msg(id, m2);
        CHECK(c.poll_msgs(id, 1, 0ms).size() == 1);
        server.stop();
    }
    {
        RelayServer server(options);
        server.start();
        RelayClient c(server.endpoint());
        auto msgs = c.poll_msgs(id, 10, 0ms);
        REQUIRE(msgs.size() == 1);
        CHECK(msgs[0] == m2);
        server.stop();
    }
}

TEST_CASE("closed state survives restart") {
    TempDir dir;
    RelayServerOptions options;
    options.port = 0;
    options.data_dir = dir.path;
    EntityId id = EntityId::random(EntityRole::Agent);
    {
        RelayServer server(options);
        server.start();
        RelayClient c(server.endpoint());
        c.register_entity(id, std::nullopt);
        c.close_entity(id);
        server.stop();
    }
    {
        RelayServer server(options);
        server.start();
        RelayClient c(server.endpoint());
        CHECK_THROWS_AS(c.put_msg(id, frame_of("x")), MailboxClosedError);
        server.stop();
    }
}

TEST_CASE("malformed requests get error responses, not dropped connections") {
    ServerFixture fx;
    net::Socket sock = net::Socket::connect(fx.server.endpoint());
    net::write_frame(sock, Bytes{0x01, 0x7e});  // unknown opcode
    auto reply = net::read_frame(sock, 2s);
    REQUIRE(reply.has_value());
    CHECK((*reply)[1] == static_cast<uint8_t>(Status::Error));

    // The same connection still serves valid requests afterwards.
    ByteWriter w = begin_request(Opcode::Discover);
    w.bstr(std::string("nope"));
    net::write_frame(sock, w.take());
    reply = net::read_frame(sock, 2s);
    REQUIRE(reply.has_value());
    CHECK((*reply)[1] == static_cast<uint8_t>(Status::Ok));
}

TEST_CASE("injected latency delays message visibility per hop") {
    RelayServerOptions options;
    options.port = 0;
    options.inject_latency_ms = 120;
    options.inject_bandwidth_mbps = 0;  // latency only
    ServerFixture fx(options);
    auto c = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);
    c.register_entity(id, std::nullopt);

    auto started = std::chrono::steady_clock::now();
    c.put_msg(id, frame_of("delayed"));
    double put_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              started)
                        .count();
    CHECK(put_ms < 100);  // the ack is immediate; the delay is transit

    CHECK(c.poll_msgs(id, 10, 0ms).empty());  // not yet visible
    auto got = c.poll_msgs(id, 10, 2s);
    double total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                started)
                          .count();
    REQUIRE(got.size() == 1);
    CHECK(total_ms >= 115);
    CHECK(total_ms < 1000);
}

TEST_CASE("injected latency never reorders a mailbox") {
    RelayServerOptions options;
    options.port = 0;
    options.inject_latency_ms = 50;
    options.inject_bandwidth_mbps = 1.0;  // 10 KB costs ~80 ms extra
    ServerFixture fx(options);
    auto c = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);
    c.register_entity(id, std::nullopt);

    Envelope big;
    big.src = EntityId::random(EntityRole::Client);
    big.dest = id;
    big.message_id = Uuid128::random();
    big.body = ActionRequestBody{"big", Payload::inline_bytes(Bytes(10000, 1))};
    Bytes big_frame = encode_envelope(big);
    Bytes small_frame = frame_of("small");

    c.put_msg(id, big_frame);   // long transit
    c.put_msg(id, small_frame); // short transit, but must not overtake
    auto got = c.poll_msgs(id, 10, 5s);
    REQUIRE(got.size() >= 1);
    CHECK(got[0] == big_frame);
}

TEST_CASE("stats expose per-entity relay accounting") {
    ServerFixture fx;
    auto c = fx.client();
    EntityId id = EntityId::random(EntityRole::Agent);
    c.register_entity(id, std::nullopt);
    Bytes f = frame_of("counted");
    c.put_msg(id, f);

    auto stats = nlohmann::json::parse(c.stats_json());
    const auto& e = stats["entities"][id.to_string()];
    CHECK(e["msgs_in"] == 1);
    CHECK(e["bytes_in"] == f.size());
    CHECK(stats["ops"]["put_msg"] >= 1);
}
