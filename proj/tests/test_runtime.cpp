#include <doctest.h>

#include <atomic>
#include <thread>

#include <nlohmann/json.hpp>

#include "agentry/local_exchange.hpp"
#include "agentry/runtime.hpp"
#include "helpers.hpp"

using namespace agentry;
using namespace std::chrono_literals;

namespace {

// Configurable test behavior assembled from lambdas.
class Probe : public Behavior {
public:
    std::atomic<int> setup_calls{0};
    std::atomic<int> shutdown_calls{0};
    std::atomic<int> loop_iterations{0};
    std::atomic<bool> loops_seen_before_setup{false};
    std::vector<std::string> order;
    std::mutex order_mu;

    explicit Probe(std::function<void(Probe&)> build) : Behavior("Probe") { build(*this); }

    void on_setup() override {
        ++setup_calls;
        note("setup");
        if (setup_should_throw) throw std::runtime_error("setup exploded");
    }
    void on_shutdown() override {
        ++shutdown_calls;
        note("shutdown");
    }

    void note(const std::string& what) {
        std::lock_guard lock(order_mu);
        order.push_back(what);
    }

    bool setup_should_throw = false;

    using Behavior::action;
    using Behavior::action_raw;
    using Behavior::event;
    using Behavior::loop;
    using Behavior::set_internally_synchronized;
    using Behavior::set_max_action_concurrency;
    using Behavior::timer;
};

struct RunningAgent {
    std::shared_ptr<Probe> behavior;
    std::shared_ptr<LocalExchange> exchange;
    EntityId id;
    std::unique_ptr<AgentRuntime> runtime;
    std::thread thread;
    std::shared_ptr<Completion<RunStatus>> result = std::make_shared<Completion<RunStatus>>();
    std::shared_ptr<Completion<bool>> threw = std::make_shared<Completion<bool>>();

    RunningAgent() = default;
    RunningAgent(RunningAgent&&) = default;
    RunningAgent& operator=(RunningAgent&&) = default;

    RunStatus join() {
        if (thread.joinable()) thread.join();
        auto r = result->poll();
        REQUIRE(r.has_value());
        return *r;
    }

    ~RunningAgent() {
        if (runtime) runtime->self_shutdown();
        if (thread.joinable()) thread.join();
    }
};

RunningAgent start(std::function<void(Probe&)> build, RuntimeOptions options = {}) {
    RunningAgent agent;
    agent.behavior = std::make_shared<Probe>(std::move(build));
    agent.exchange = LocalExchange::create();
    agent.id = agent.exchange->register_entity(EntityRole::Agent, agent.behavior->spec());
    agent.runtime =
        std::make_unique<AgentRuntime>(agent.behavior, agent.exchange->bind(agent.id), options);
    agent.thread = std::thread([rt = agent.runtime.get(), result = agent.result,
                                threw = agent.threw] {
        try {
            result->resolve(rt->run());
        } catch (const SetupError&) {
            threw->resolve(true);
            result->resolve(RunStatus{RunStatus::Kind::LoopFailure, {}});
        }
    });
    return agent;
}

Envelope action_request(const EntityId& src, const EntityId& dest, std::string action,
                        std::string arg = "{}") {
    return make_action_request(src, dest, std::move(action), Payload::inline_text(arg));
}

}  // namespace

TEST_CASE("loop-free agent serves actions until shutdown") {
    auto agent = start([](Probe& p) {
        p.action("square", [](const Bytes& b) {
            double v = nlohmann::json::parse(to_string(b)).get<double>();
            return to_bytes(nlohmann::json(v * v).dump());
        });
    });
    EntityId client = agent.exchange->register_entity(EntityRole::Client);

    agent.exchange->send(action_request(client, agent.id, "square", "2"));
    Envelope reply = agent.exchange->recv(client, 2s);
    const auto& body = std::get<ActionResponseBody>(reply.body);
    REQUIRE(body.ok());
    CHECK(nlohmann::json::parse(to_string(std::get<Payload>(body.outcome).bytes())).get<double>() == 4.0);

    agent.exchange->send(make_shutdown(client, agent.id, true));
    CHECK(agent.join().clean());
    CHECK(agent.behavior->setup_calls == 1);
    CHECK(agent.behavior->shutdown_calls == 1);
}

TEST_CASE("unknown actions return UnknownAction errors") {
    auto agent = start([](Probe& p) {
        p.action("known", [](const Bytes& b) { return b; });
    });
    EntityId client = agent.exchange->register_entity(EntityRole::Client);
    agent.exchange->send(action_request(client, agent.id, "nope"));
    Envelope reply = agent.exchange->recv(client, 2s);
    const auto& body = std::get<ActionResponseBody>(reply.body);
    REQUIRE_FALSE(body.ok());
    CHECK(std::get<ErrorInfo>(body.outcome).kind == ErrorKind::UnknownAction);
}

TEST_CASE("action exceptions reach the caller verbatim and the agent survives") {
    auto agent = start([](Probe& p) {
        p.action("boom", [](const Bytes&) -> Bytes {
            throw std::runtime_error("kaboom: engine failure 17");
        });
    });
    EntityId client = agent.exchange->register_entity(EntityRole::Client);

    agent.exchange->send(action_request(client, agent.id, "boom"));
    Envelope reply = agent.exchange->recv(client, 2s);
    const auto& body = std::get<ActionResponseBody>(reply.body);
    REQUIRE_FALSE(body.ok());
    CHECK(std::get<ErrorInfo>(body.outcome).kind == ErrorKind::ActionRaised);
    CHECK(std::get<ErrorInfo>(body.outcome).detail == "kaboom: engine failure 17");

    // Still alive afterwards.
    agent.exchange->send(make_ping(client, agent.id));
    CHECK(agent.exchange->recv(client, 2s).kind() == MessageKind::PingResponse);
}

TEST_CASE("loop errors shut the agent down under the default policy") {
    auto agent = start([](Probe& p) {
        p.loop("fragile", [](ShutdownSignal&) { throw std::runtime_error("loop died"); });
    });
    RunStatus status = agent.join();
    CHECK_FALSE(status.clean());
    CHECK(status.error.detail.find("loop died") != std::string::npos);
}

TEST_CASE("loop errors can be suppressed to keep the agent alive") {
    RuntimeOptions options;
    options.loop_error_policy = LoopErrorPolicy::SuppressAndContinue;
    auto agent = start(
        [](Probe& p) {
            p.loop("fragile", [](ShutdownSignal&) { throw std::runtime_error("loop died"); });
        },
        options);

    std::this_thread::sleep_for(100ms);
    EntityId client = agent.exchange->register_entity(EntityRole::Client);
    agent.exchange->send(make_ping(client, agent.id));
    CHECK(agent.exchange->recv(client, 2s).kind() == MessageKind::PingResponse);

    agent.runtime->self_shutdown();
    CHECK(agent.join().clean());
}

TEST_CASE("on_setup failure closes the mailbox and surfaces to the launcher") {
    auto agent = start([](Probe& p) {
        p.setup_should_throw = true;
        p.loop("never", [](ShutdownSignal& s) { s.wait(); });
    });
    agent.thread.join();
    CHECK(agent.threw->resolved());
    CHECK(agent.behavior->loop_iterations == 0);
    CHECK(agent.exchange->state(agent.id) == MailboxState::Closed);
}

TEST_CASE("setup precedes loops and actions; on_shutdown follows the last loop") {
    auto agent = start([](Probe& p) {
        p.loop("worker", [&p](ShutdownSignal& s) {
            if (p.setup_calls == 0) p.loops_seen_before_setup = true;
            p.note("loop-run");
            s.wait();
            p.note("loop-exit");
        });
    });
    std::this_thread::sleep_for(50ms);
    agent.runtime->self_shutdown();
    CHECK(agent.join().clean());
    CHECK_FALSE(agent.behavior->loops_seen_before_setup);

    std::lock_guard lock(agent.behavior->order_mu);
    const auto& order = agent.behavior->order;
    REQUIRE(order.size() == 4);
    CHECK(order[0] == "setup");
    CHECK(order[1] == "loop-run");
    CHECK(order[2] == "loop-exit");
    CHECK(order[3] == "shutdown");
}

TEST_CASE("self_shutdown is idempotent and works before loops start") {
    auto agent = start([](Probe& p) {
        p.loop("counter", [&p](ShutdownSignal& s) {
            while (!s.wait_for(10ms)) ++p.loop_iterations;
        });
    });
    agent.runtime->self_shutdown();
    agent.runtime->self_shutdown();
    CHECK(agent.join().clean());
    CHECK(agent.behavior->setup_calls == 1);
    CHECK(agent.behavior->shutdown_calls == 1);
}

TEST_CASE("a loop can terminate the agent itself") {
    std::atomic<int> iterations{0};
    auto agent = start([&](Probe& p) {
        p.loop("three", [&iterations, &p](ShutdownSignal& s) {
            while (!s.is_set()) {
                if (++iterations >= 3) {
                    p.ctx().self_shutdown();
                    return;
                }
                s.wait_for(5ms);
            }
        });
    });
    CHECK(agent.join().clean());
    CHECK(iterations == 3);
}

TEST_CASE("pool of one serializes concurrent actions") {
    RuntimeOptions options;
    options.action_pool_size = 1;
    auto agent = start(
        [](Probe& p) {
            p.set_internally_synchronized(true);
            p.action("sleep", [](const Bytes&) {
                std::this_thread::sleep_for(300ms);
                return Bytes{};
            });
        },
        options);
    EntityId client = agent.exchange->register_entity(EntityRole::Client);

    auto started = std::chrono::steady_clock::now();
    agent.exchange->send(action_request(client, agent.id, "sleep"));
    agent.exchange->send(action_request(client, agent.id, "sleep"));
    std::vector<double> at;
    for (int i = 0; i < 2; ++i) {
        agent.exchange->recv(client, 5s);
        at.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                         .count());
    }
    CHECK(at[0] >= 0.25);
    CHECK(at[1] >= 0.55);            // second runs only after the first
    CHECK(at[1] - at[0] >= 0.25);    // ~one action apart
}

TEST_CASE("pool of k runs k sleeps concurrently") {
    RuntimeOptions options;
    options.action_pool_size = 4;
    auto agent = start(
        [](Probe& p) {
            p.set_internally_synchronized(true);
            p.action("sleep", [](const Bytes&) {
                std::this_thread::sleep_for(200ms);
                return Bytes{};
            });
        },
        options);
    EntityId client = agent.exchange->register_entity(EntityRole::Client);

    auto started = std::chrono::steady_clock::now();
    for (int i = 0; i < 8; ++i) agent.exchange->send(action_request(client, agent.id, "sleep"));
    for (int i = 0; i < 8; ++i) agent.exchange->recv(client, 5s);
    double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    // ceil(8/4) * 0.2 s plus overhead budget.
    CHECK(total >= 0.4);
    CHECK(total < 1.2);
}

TEST_CASE("requests from one sender are dequeued in send order") {
    RuntimeOptions options;
    options.action_pool_size = 1;
    std::vector<int> seen;
    std::mutex seen_mu;
    auto agent = start([&](Probe& p) {
        p.action("record", [&](const Bytes& b) {
            std::lock_guard lock(seen_mu);
            seen.push_back(std::stoi(to_string(b)));
            return Bytes{};
        });
    }, options);
    EntityId client = agent.exchange->register_entity(EntityRole::Client);

    for (int i = 0; i < 50; ++i) {
        agent.exchange->send(action_request(client, agent.id, "record", std::to_string(i)));
    }
    for (int i = 0; i < 50; ++i) agent.exchange->recv(client, 2s);
    std::lock_guard lock(seen_mu);
    REQUIRE(seen.size() == 50);
    for (int i = 0; i < 50; ++i) CHECK(seen[static_cast<size_t>(i)] == i);
}

TEST_CASE("timer loops tick on their interval") {
    std::atomic<int> ticks{0};
    auto agent = start([&](Probe& p) {
        p.timer("tick", 100ms, [&] { ++ticks; });
    });
    std::this_thread::sleep_for(1050ms);
    agent.runtime->self_shutdown();
    agent.join();
    CHECK(ticks >= 9);
    CHECK(ticks <= 11);
}

TEST_CASE("event loops run once per fire") {
    std::atomic<int> runs{0};
    auto agent = start([&](Probe& p) {
        p.event("on_sample", "sample", [&] { ++runs; });
    });
    std::this_thread::sleep_for(50ms);

    agent.runtime->fire_event("sample");
    agent.runtime->fire_event("sample");
    std::this_thread::sleep_for(300ms);
    CHECK(runs == 2);

    SUBCASE("unknown event names raise") {
        CHECK_THROWS_AS(agent.runtime->fire_event("bogus"), std::invalid_argument);
    }
    SUBCASE("firing after shutdown is a no-op") {
        agent.runtime->self_shutdown();
        agent.join();
        CHECK_NOTHROW(agent.runtime->fire_event("sample"));
        std::this_thread::sleep_for(100ms);
        CHECK(runs == 2);
    }
}

TEST_CASE("loops that ignore the signal are abandoned after the join budget") {
    RuntimeOptions options;
    options.join_budget = 200ms;
    auto gate = std::make_shared<Completion<bool>>();
    auto agent = start(
        [&](Probe& p) {
            p.loop("stubborn", [gate](ShutdownSignal&) { gate->wait(); });
        },
        options);
    std::this_thread::sleep_for(50ms);

    auto started = std::chrono::steady_clock::now();
    agent.runtime->self_shutdown();
    CHECK(agent.join().clean());
    double waited =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    CHECK(waited < 2.0);
    gate->resolve(true);  // release the abandoned thread
    std::this_thread::sleep_for(50ms);
}

TEST_CASE("terminal shutdown closes the mailbox; non-terminal leaves it open") {
    for (bool terminal : {true, false}) {
        auto agent = start([](Probe& p) {
            p.action("noop", [](const Bytes& b) { return b; });
        });
        EntityId client = agent.exchange->register_entity(EntityRole::Client);
        agent.exchange->send(make_shutdown(client, agent.id, terminal));
        CHECK(agent.join().clean());
        CHECK(agent.exchange->state(agent.id) ==
              (terminal ? MailboxState::Closed : MailboxState::Open));
    }
}

TEST_CASE("shutdown acknowledgments carry the shutdown message id") {
    auto agent = start([](Probe& p) {
        p.action("noop", [](const Bytes& b) { return b; });
    });
    EntityId client = agent.exchange->register_entity(EntityRole::Client);
    Envelope shutdown = make_shutdown(client, agent.id, true);
    agent.exchange->send(shutdown);
    Envelope ack = agent.exchange->recv(client, 2s);
    REQUIRE(ack.kind() == MessageKind::PingResponse);
    CHECK(std::get<PingResponseBody>(ack.body).request_id == shutdown.message_id);
    agent.join();
}
