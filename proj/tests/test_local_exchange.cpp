#include <doctest.h>

#include <thread>

#include "agentry/local_exchange.hpp"
#include "helpers.hpp"

using namespace agentry;
using namespace std::chrono_literals;

namespace {

BehaviorSpec named_spec(std::string name, std::vector<std::string> parents = {}) {
    BehaviorSpec spec;
    spec.name = name;
    spec.ancestry.push_back(std::move(name));
    for (auto& p : parents) spec.ancestry.push_back(std::move(p));
    return spec;
}

Envelope note(const EntityId& src, const EntityId& dest, std::string text) {
    return make_action_request(src, dest, "note", Payload::inline_text(text));
}

}  // namespace

TEST_CASE("registration yields unique open mailboxes") {
    auto ex = LocalExchange::create();
    EntityId a = ex->register_entity(EntityRole::Agent);
    EntityId b = ex->register_entity(EntityRole::Client);
    CHECK(a != b);
    CHECK(a.role == EntityRole::Agent);
    CHECK(b.role == EntityRole::Client);
    CHECK(ex->state(a) == MailboxState::Open);

    std::vector<EntityId> ids;
    for (int i = 0; i < 10000; ++i) ids.push_back(ex->register_entity(EntityRole::Agent));
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("send/recv preserves envelopes and order") {
    auto ex = LocalExchange::create();
    EntityId src = ex->register_entity(EntityRole::Client);
    EntityId dest = ex->register_entity(EntityRole::Agent);

    Envelope first = note(src, dest, "one");
    Envelope second = note(src, dest, "two");
    ex->send(first);
    ex->send(second);
    CHECK(ex->recv(dest, 100ms) == first);
    CHECK(ex->recv(dest, 100ms) == second);
}

TEST_CASE("recv times out on an empty mailbox") {
    auto ex = LocalExchange::create();
    EntityId id = ex->register_entity(EntityRole::Agent);
    CHECK_THROWS_AS(ex->recv(id, 30ms), TimeoutError);
}

TEST_CASE("send to unknown entity fails") {
    auto ex = LocalExchange::create();
    EntityId src = ex->register_entity(EntityRole::Client);
    EntityId ghost = EntityId::random(EntityRole::Agent);
    CHECK_THROWS_AS(ex->send(note(src, ghost, "x")), UnknownEntityError);
    CHECK_THROWS_AS(ex->recv(ghost, 10ms), UnknownEntityError);
    CHECK_THROWS_AS(ex->close(ghost), UnknownEntityError);
}

TEST_CASE("messages sent while the owner is away are delivered later") {
    auto ex = LocalExchange::create();
    EntityId src = ex->register_entity(EntityRole::Client);
    EntityId dest = ex->register_entity(EntityRole::Agent);

    Envelope e = note(src, dest, "offline");
    ex->send(e);
    // The owner binds and reads later; nothing is lost while Open.
    auto binding = ex->bind(dest);
    CHECK(binding->recv(100ms) == e);
}

TEST_CASE("closed mailboxes drain then raise") {
    auto ex = LocalExchange::create();
    EntityId src = ex->register_entity(EntityRole::Client);
    EntityId dest = ex->register_entity(EntityRole::Agent);

    ex->send(note(src, dest, "queued"));
    ex->close(dest);

    SUBCASE("send to closed raises immediately") {
        CHECK_THROWS_AS(ex->send(note(src, dest, "rejected")), MailboxClosedError);
    }
    SUBCASE("queued messages remain drainable, then recv raises") {
        CHECK(ex->recv(dest, 50ms).kind() == MessageKind::ActionRequest);
        CHECK_THROWS_AS(ex->recv(dest, 50ms), MailboxClosedError);
    }
    SUBCASE("close is absorbing") {
        ex->close(dest);
        CHECK(ex->state(dest) == MailboxState::Closed);
    }
}

TEST_CASE("recv wakes when a message arrives") {
    auto ex = LocalExchange::create();
    EntityId src = ex->register_entity(EntityRole::Client);
    EntityId dest = ex->register_entity(EntityRole::Agent);

    std::thread sender([&] {
        std::this_thread::sleep_for(30ms);
        ex->send(note(src, dest, "late"));
    });
    auto started = std::chrono::steady_clock::now();
    Envelope got = ex->recv(dest, 2s);
    auto waited = std::chrono::steady_clock::now() - started;
    sender.join();
    CHECK(got.kind() == MessageKind::ActionRequest);
    CHECK(waited < 1s);
}

TEST_CASE("discovery matches behavior ancestry") {
    auto ex = LocalExchange::create();
    CHECK(ex->discover("ProteinFolder").empty());

    EntityId folder = ex->register_entity(EntityRole::Agent, named_spec("ProteinFolder"));
    EntityId open_folder = ex->register_entity(
        EntityRole::Agent, named_spec("OpenProteinFolder", {"ProteinFolder"}));
    // Clients are never discoverable.
    ex->register_entity(EntityRole::Client, named_spec("ProteinFolder"));

    auto both = ex->discover("ProteinFolder");
    std::sort(both.begin(), both.end());
    std::vector<EntityId> expected{folder, open_folder};
    std::sort(expected.begin(), expected.end());
    CHECK(both == expected);

    auto leaves = ex->discover("OpenProteinFolder");
    CHECK(leaves == std::vector<EntityId>{open_folder});
}

TEST_CASE("sends from many threads keep per-sender FIFO") {
    auto ex = LocalExchange::create();
    EntityId dest = ex->register_entity(EntityRole::Agent);
    constexpr int kSenders = 8;
    constexpr int kPerSender = 200;

    std::vector<EntityId> senders;
    for (int s = 0; s < kSenders; ++s) senders.push_back(ex->register_entity(EntityRole::Client));

    std::vector<std::thread> threads;
    for (int s = 0; s < kSenders; ++s) {
        threads.emplace_back([&, s] {
            for (int i = 0; i < kPerSender; ++i) {
                ex->send(note(senders[static_cast<size_t>(s)], dest, std::to_string(i)));
            }
        });
    }
    for (auto& t : threads) t.join();

    std::unordered_map<EntityId, int> next_expected;
    for (int i = 0; i < kSenders * kPerSender; ++i) {
        Envelope e = ex->recv(dest, 100ms);
        const auto& body = std::get<ActionRequestBody>(e.body);
        int seq = std::stoi(to_string(body.payload.bytes()));
        CHECK(seq == next_expected[e.src]);
        next_expected[e.src] = seq + 1;
    }
}
