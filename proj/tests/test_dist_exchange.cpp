#include <doctest.h>

#include <thread>

#include "agentry/dist_exchange.hpp"
#include "agentry/relay/server.hpp"
#include "helpers.hpp"

using namespace agentry;
using namespace std::chrono_literals;

namespace {

struct StoreFixture {
    relay::RelayServer server;

    StoreFixture() : server(options()) { server.start(); }
    ~StoreFixture() { server.stop(); }

    static relay::RelayServerOptions options() {
        relay::RelayServerOptions o;
        o.port = 0;
        return o;
    }

    net::Endpoint endpoint() { return server.endpoint(); }
};

Envelope note(const EntityId& src, const EntityId& dest, const std::string& text) {
    return make_action_request(src, dest, "note", Payload::inline_text(text));
}

std::string text_of(const Envelope& e) {
    return to_string(std::get<ActionRequestBody>(e.body).payload.bytes());
}

}  // namespace

TEST_CASE("two listening entities exchange envelopes without touching the relay queue") {
    StoreFixture store;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client);
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent);

    for (int i = 0; i < 20; ++i) a->send(note(a->id(), b->id(), "m" + std::to_string(i)));
    for (int i = 0; i < 20; ++i) {
        CHECK(text_of(b->recv(2s)) == "m" + std::to_string(i));
    }
    auto counters = a->counters();
    CHECK(counters.direct_sends == 20);
    CHECK(counters.relay_sends == 0);
    CHECK(counters.control.put_msgs == 0);
}

TEST_CASE("a non-listening destination is reached through the relay") {
    StoreFixture store;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client);
    DistOptions nat;
    nat.direct_listen = false;  // emulates a peer behind NAT
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent, std::nullopt, nat);

    a->send(note(a->id(), b->id(), "fallback"));
    CHECK(text_of(b->recv(5s)) == "fallback");
    auto counters = a->counters();
    CHECK(counters.relay_sends == 1);
    CHECK(counters.direct_sends == 0);

    // LOCATE reports no endpoint for the relay-only entity.
    CHECK_FALSE(a->store_client().locate(b->id()).endpoint.has_value());
}

TEST_CASE("relay-only senders never attempt direct routes") {
    StoreFixture store;
    DistOptions relay_only;
    relay_only.relay_only_messaging = true;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client, std::nullopt, relay_only);
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent);

    a->send(note(a->id(), b->id(), "via-store"));
    CHECK(text_of(b->recv(5s)) == "via-store");
    CHECK(a->counters().relay_sends == 1);
    CHECK(a->counters().direct_sends == 0);
}

TEST_CASE("killing the destination listener fails over without losing messages") {
    StoreFixture store;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client);

    DistOptions bopt;
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent, std::nullopt, bopt);
    EntityId b_id = b->id();

    a->send(note(a->id(), b_id, "before"));
    CHECK(text_of(b->recv(2s)) == "before");
    CHECK(a->counters().direct_sends == 1);

    // The destination process "dies": its listener goes away, but the
    // mailbox stays open at the store.
    b.reset();

    for (int i = 0; i < 5; ++i) a->send(note(a->id(), b_id, "during-" + std::to_string(i)));
    CHECK(a->counters().relay_sends >= 5);

    // The entity comes back (same id), drains the relay backlog.
    auto revived = DistExchange::attach(store.endpoint(), b_id, bopt);
    for (int i = 0; i < 5; ++i) {
        CHECK(text_of(revived->recv(5s)) == "during-" + std::to_string(i));
    }
}

TEST_CASE("direct routes are re-probed after the cache demotion window") {
    StoreFixture store;
    DistOptions aopt;
    aopt.reprobe_interval = 200ms;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client, std::nullopt, aopt);

    DistOptions bopt;
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent, std::nullopt, bopt);
    EntityId b_id = b->id();
    a->send(note(a->id(), b_id, "one"));
    CHECK(text_of(b->recv(2s)) == "one");

    b.reset();  // direct route dies
    a->send(note(a->id(), b_id, "two"));
    CHECK(a->counters().relay_sends >= 1);

    auto revived = DistExchange::attach(store.endpoint(), b_id, bopt);
    CHECK(text_of(revived->recv(5s)) == "two");

    // After the reprobe window the sender locates the new endpoint and goes
    // back to the direct path.
    std::this_thread::sleep_for(250ms);
    uint64_t direct_before = a->counters().direct_sends;
    a->send(note(a->id(), b_id, "three"));
    CHECK(text_of(revived->recv(5s)) == "three");
    CHECK(a->counters().direct_sends == direct_before + 1);
}

TEST_CASE("send to a closed mailbox raises through both paths") {
    StoreFixture store;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client);
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent);
    a->close(b->id());
    CHECK_THROWS_AS(a->send(note(a->id(), b->id(), "x")), MailboxClosedError);
    CHECK_THROWS_AS(b->recv(5s), MailboxClosedError);
}

TEST_CASE("own close drains queued envelopes before raising") {
    StoreFixture store;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client);
    DistOptions nat;
    nat.direct_listen = false;
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent, std::nullopt, nat);

    a->send(note(a->id(), b->id(), "queued"));
    std::this_thread::sleep_for(300ms);  // let the poller pull it in
    b->close(b->id());
    CHECK(text_of(b->recv(2s)) == "queued");
    CHECK_THROWS_AS(b->recv(2s), MailboxClosedError);
}

TEST_CASE("duplicate message ids from one sender are suppressed") {
    StoreFixture store;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client);
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent);

    Envelope e = note(a->id(), b->id(), "once");
    Bytes frame = encode_envelope(e);
    // A transport retry can deliver the same envelope twice: once direct,
    // once via the relay.
    a->send(e);
    a->store_client().put_msg(b->id(), frame);
    a->send(note(a->id(), b->id(), "after"));

    CHECK(text_of(b->recv(2s)) == "once");
    CHECK(text_of(b->recv(5s)) == "after");
    CHECK(b->counters().duplicates_dropped == 1);
}

TEST_CASE("discovery works through the dist exchange") {
    StoreFixture store;
    BehaviorSpec spec;
    spec.name = "Scanner";
    spec.ancestry = {"Scanner", "Sensor"};
    auto agent = DistExchange::connect(store.endpoint(), EntityRole::Agent, spec);
    auto client = DistExchange::connect(store.endpoint(), EntityRole::Client);

    CHECK(client->discover("Sensor") == std::vector<EntityId>{agent->id()});
    CHECK(client->discover("Scanner") == std::vector<EntityId>{agent->id()});
    CHECK(client->discover("Other").empty());
}

TEST_CASE("dist hub registers, binds and reconnects ids") {
    StoreFixture store;
    auto hub = std::make_shared<DistHub>(store.endpoint());
    EntityId id = hub->register_entity(EntityRole::Agent);
    auto binding = hub->bind(id);
    CHECK(binding->id() == id);

    auto client = hub->register_and_bind(EntityRole::Client);
    client->send(note(client->id(), id, "hello"));
    CHECK(text_of(binding->recv(2s)) == "hello");
    CHECK(hub->store_endpoint().has_value());
}

TEST_CASE("interleaved direct and relay traffic from one sender keeps per-path order") {
    StoreFixture store;
    auto a = DistExchange::connect(store.endpoint(), EntityRole::Client);
    auto b = DistExchange::connect(store.endpoint(), EntityRole::Agent);

    // Direct stream.
    for (int i = 0; i < 10; ++i) a->send(note(a->id(), b->id(), "d" + std::to_string(i)));
    // Relay stream, raw, same sender id.
    for (int i = 0; i < 10; ++i) {
        a->store_client().put_msg(b->id(),
                                  encode_envelope(note(a->id(), b->id(), "r" + std::to_string(i))));
    }

    int next_direct = 0;
    int next_relay = 0;
    for (int i = 0; i < 20; ++i) {
        std::string text = text_of(b->recv(5s));
        if (text[0] == 'd') {
            CHECK(text == "d" + std::to_string(next_direct++));
        } else {
            CHECK(text == "r" + std::to_string(next_relay++));
        }
    }
    CHECK(next_direct == 10);
    CHECK(next_relay == 10);
}
