#include <doctest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "agentry/dist_exchange.hpp"
#include "agentry/launch/manager.hpp"
#include "agentry/launch/registry.hpp"
#include "agentry/launch/state_store.hpp"
#include "agentry/launch/subprocess.hpp"
#include "agentry/local_exchange.hpp"
#include "agentry/relay/server.hpp"
#include "behaviors.hpp"
#include "helpers.hpp"

using namespace agentry;
using namespace std::chrono_literals;
using agentry::testing::TempDir;

namespace {

std::filesystem::path agent_binary() {
    return AGENTRY_AGENT_BIN;
}

struct DistFixture {
    relay::RelayServer server;
    std::shared_ptr<DistHub> hub;

    DistFixture() : server(options()) {
        server.start();
        hub = std::make_shared<DistHub>(server.endpoint());
    }
    ~DistFixture() { server.stop(); }

    static relay::RelayServerOptions options() {
        relay::RelayServerOptions o;
        o.port = 0;
        return o;
    }

    std::shared_ptr<SubprocessLauncher> launcher(int max_restarts = 3) {
        SubprocessOptions so;
        so.child_binary = agent_binary();
        so.max_restarts = max_restarts;
        so.backoff_initial = 100ms;
        return std::make_shared<SubprocessLauncher>(so);
    }
};

double json_number(const ActionResult& r) {
    return nlohmann::json::parse(to_string(r.payload().bytes())).get<double>();
}

}  // namespace

TEST_CASE("launch starts an agent and returns a usable handle") {
    bench::register_bench_behaviors();
    auto exchange = LocalExchange::create();
    Manager manager(exchange);
    manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());

    Handle h = manager.launch_registered("Example");
    auto result = h.call("square", Payload::inline_text("2"));
    REQUIRE(result.ok());
    CHECK(json_number(result) == 4.0);

    manager.shutdown_agent(h.target(), /*blocking=*/true);
    CHECK_THROWS_AS(h.ping(), MailboxClosedError);
}

TEST_CASE("launching with an unknown launcher or behavior fails") {
    bench::register_bench_behaviors();
    auto exchange = LocalExchange::create();
    Manager manager(exchange);
    manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());
    CHECK_THROWS_AS(manager.launch_registered("Example", "", "warp-drive"), AgentryError);
    CHECK_THROWS_AS(manager.launch_registered("NoSuchBehavior"), std::invalid_argument);
}

TEST_CASE("64 in-process agents all come up distinct and pingable") {
    bench::register_bench_behaviors();
    auto exchange = LocalExchange::create();
    Manager manager(exchange);
    manager.add_launcher("in-process", std::make_shared<InProcessLauncher>());

    std::vector<Handle> handles;
    for (int i = 0; i < 64; ++i) handles.push_back(manager.launch_registered("Worker"));
    std::set<EntityId> distinct;
    for (auto& h : handles) {
        distinct.insert(h.target());
        CHECK(h.ping().count() > 0);
    }
    CHECK(distinct.size() == 64);
}

TEST_CASE("manager teardown stops every launched agent within budget") {
    bench::register_bench_behaviors();
    auto exchange = LocalExchange::create();
    std::vector<EntityId> ids;
    {
        Manager manager(exchange);
        auto launcher = std::make_shared<InProcessLauncher>();
        manager.add_launcher("in-process", launcher);
        for (int i = 0; i < 10; ++i) ids.push_back(manager.launch_registered("Example").target());
        auto started = std::chrono::steady_clock::now();
        manager.shutdown_all();
        CHECK(std::chrono::steady_clock::now() - started < 15s);
        for (const auto& id : ids) {
            CHECK(launcher->status(id) == AgentStatus::Stopped);
        }
    }
    for (const auto& id : ids) CHECK(exchange->state(id) == MailboxState::Closed);
}

TEST_CASE("state store round-trips, lists and deletes keys") {
    TempDir dir;
    StateStore store(dir.path, "agent-1");
    CHECK_FALSE(store.get("count").has_value());
    store.set_text("count", "41");
    store.set_text("name", "probe");
    CHECK(store.get_text("count") == "41");
    store.set_text("count", "42");
    CHECK(store.get_text("count") == "42");

    auto keys = store.keys();
    std::sort(keys.begin(), keys.end());
    CHECK(keys == std::vector<std::string>{"count", "name"});
    CHECK(store.remove("name"));
    CHECK_FALSE(store.remove("name"));
    CHECK_THROWS_AS(store.set_text("../escape", "x"), std::invalid_argument);
    CHECK_THROWS_AS(store.get("a/b"), std::invalid_argument);
}

TEST_CASE("a writer killed mid-stream never leaves a torn value") {
    TempDir dir;
    const std::string root = dir.path.string();

    // Child loop: rewrite the same key with self-checked values as fast as
    // possible until killed.
    for (int round = 0; round < 6; ++round) {
        pid_t pid = fork();
        REQUIRE(pid >= 0);
        if (pid == 0) {
            StateStore store(root, "crash");
            uint64_t n = 0;
            for (;;) {
                std::string value = std::to_string(n) + ":" + std::string(n % 977, 'v') + ":" +
                                    std::to_string(n);
                store.set_text("cell", value);
                ++n;
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(30 + 37 * round));
        ::kill(pid, SIGKILL);
        int wstatus = 0;
        ::waitpid(pid, &wstatus, 0);

        StateStore store(root, "crash");
        auto value = store.get_text("cell");
        REQUIRE(value.has_value());
        // Self-consistency: "<n>:<filler>:<n>" with matching halves.
        auto first = value->find(':');
        auto last = value->rfind(':');
        REQUIRE(first != std::string::npos);
        REQUIRE(last != first);
        std::string head = value->substr(0, first);
        std::string tail = value->substr(last + 1);
        CHECK(head == tail);
        CHECK(value->size() == head.size() * 2 + 2 + std::stoull(head) % 977);
    }
}

TEST_CASE("subprocess agents serve actions and stop cleanly") {
    bench::register_bench_behaviors();
    DistFixture fx;
    Manager manager(fx.hub);
    manager.add_launcher("subprocess", fx.launcher());

    Handle h = manager.launch_registered("Example");
    ActionResult result = h.call("square", Payload::inline_text("3"), 15s);
    REQUIRE(result.ok());
    CHECK(json_number(result) == 9.0);

    manager.shutdown_agent(h.target(), /*blocking=*/true);
    CHECK(manager.status(h.target()) == AgentStatus::Stopped);
}

TEST_CASE("a killed subprocess restarts and pending invokes resolve") {
    bench::register_bench_behaviors();
    DistFixture fx;
    Manager manager(fx.hub);
    auto launcher = fx.launcher(3);
    manager.add_launcher("subprocess", launcher);

    Handle h = manager.launch_registered("Example");
    REQUIRE(h.call("square", Payload::inline_text("2"), 15s).ok());

    auto pid = launcher->pid(h.target());
    REQUIRE(pid.has_value());
    ::kill(*pid, SIGKILL);

    // Issued while the agent is down; resolves after the restart.
    auto pending = h.invoke("square", Payload::inline_text("5"));
    auto result = pending.wait_for(20s);
    REQUIRE(result.ok());
    CHECK(json_number(result) == 25.0);
    CHECK(launcher->restarts(h.target()) >= 1);
    CHECK(launcher->pid(h.target()) != pid);

    manager.shutdown_agent(h.target(), true);
}

TEST_CASE("restarts beyond the budget close the mailbox terminally") {
    bench::register_bench_behaviors();
    DistFixture fx;
    Manager manager(fx.hub);
    auto launcher = fx.launcher(/*max_restarts=*/2);
    manager.add_launcher("subprocess", launcher);

    Handle h = manager.launch_registered("Crashy");
    REQUIRE(h.call("beat", Payload{}, 15s).ok());

    // Keep killing it through every allowed restart.
    for (int round = 0; round < 3; ++round) {
        auto deadline = std::chrono::steady_clock::now() + 20s;
        std::optional<pid_t> pid;
        while (std::chrono::steady_clock::now() < deadline) {
            if (launcher->status(h.target()) == AgentStatus::Failed) break;
            pid = launcher->pid(h.target());
            if (pid) {
                try {
                    h.ping(500ms);
                } catch (const std::exception&) {
                    continue;  // not up yet
                }
                break;
            }
        }
        if (launcher->status(h.target()) == AgentStatus::Failed) break;
        REQUIRE(pid.has_value());
        ::kill(*pid, SIGKILL);
    }

    auto deadline = std::chrono::steady_clock::now() + 30s;
    while (launcher->status(h.target()) != AgentStatus::Failed &&
           std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(100ms);
    }
    CHECK(launcher->status(h.target()) == AgentStatus::Failed);
    CHECK(launcher->restarts(h.target()) == 2);

    // Mailbox is closed terminally: new sends are refused.
    auto result = h.invoke("beat").wait_for(5s);
    REQUIRE_FALSE(result.ok());
    CHECK(result.error().kind == ErrorKind::MailboxClosed);
}

TEST_CASE("clean self-shutdown is never restarted") {
    bench::register_bench_behaviors();
    DistFixture fx;
    Manager manager(fx.hub);
    auto launcher = fx.launcher(3);
    manager.add_launcher("subprocess", launcher);

    Handle h = manager.launch_registered("Example");
    REQUIRE(h.call("square", Payload::inline_text("1"), 15s).ok());
    h.shutdown(/*terminal=*/true, /*blocking=*/true, 15s);

    REQUIRE(launcher->wait_exit(h.target(), 10s));
    CHECK(launcher->status(h.target()) == AgentStatus::Stopped);
    CHECK(launcher->restarts(h.target()) == 0);
}

TEST_CASE("checkpointed state continues across a non-terminal restart") {
    bench::register_bench_behaviors();
    TempDir state_dir;
    DistFixture fx;
    Manager manager(fx.hub);
    auto launcher = fx.launcher(3);
    manager.add_launcher("subprocess", launcher);

    nlohmann::json args;
    args["state_root"] = state_dir.path.string();
    Handle h = manager.launch_registered("Counter", args.dump());

    for (int i = 0; i < 3; ++i) REQUIRE(h.call("bump", Payload{}, 15s).ok());

    // Kill the process; the supervisor relaunches the same id and on_setup
    // restores the counter from its checkpoint.
    auto pid = launcher->pid(h.target());
    REQUIRE(pid.has_value());
    ::kill(*pid, SIGKILL);

    auto result = h.invoke("bump", Payload{}).wait_for(20s);
    REQUIRE(result.ok());
    CHECK(json_number(result) == 4.0);

    manager.shutdown_agent(h.target(), true);
}
