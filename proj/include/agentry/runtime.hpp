#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agentry/behavior.hpp"
#include "agentry/envelope.hpp"
#include "agentry/exchange.hpp"
#include "agentry/handle.hpp"
#include "agentry/router.hpp"
#include "agentry/signal.hpp"

namespace agentry {

class AgentRuntime;

enum class LoopErrorPolicy {
    ShutdownOnError,      // a loop exception shuts the agent down (default)
    SuppressAndContinue,  // log it; the agent stays alive
};

struct RunStatus {
    enum class Kind { CleanShutdown, LoopFailure };
    Kind kind = Kind::CleanShutdown;
    ErrorInfo error;

    bool clean() const { return kind == Kind::CleanShutdown; }
};

// on_setup raised; the agent never started its loops.
class SetupError : public AgentryError {
public:
    using AgentryError::AgentryError;
};

struct RuntimeOptions {
    LoopErrorPolicy loop_error_policy = LoopErrorPolicy::ShutdownOnError;
    // 0: use the behavior's max_action_concurrency, defaulting to 4 when
    // that is unbounded.
    int action_pool_size = 0;
    std::chrono::milliseconds join_budget{5000};
    std::chrono::milliseconds listener_poll{100};
    std::chrono::milliseconds handle_timeout{30000};
};

namespace detail {
struct ExecShared;
}

// Runtime services exposed to a running behavior.
class AgentContext {
public:
    const EntityId& self_id() const;
    Handle handle_to(const EntityId& target) const;
    ObjectDepot* depot() const;
    void self_shutdown(bool terminal = true);
    void fire_event(const std::string& name);
    ShutdownSignal shutdown_signal() const;
    std::vector<EntityId> discover(std::string_view behavior_name) const;

    // Payload helpers bound to the runtime's depot.
    Bytes materialize(const Payload& p) const;
    Payload wrap(Bytes result) const;

    // Explicit access to the behavior-state guard for plain loops (actions
    // and timer/event bodies are guarded automatically unless the behavior
    // is internally synchronized).
    std::unique_lock<std::recursive_mutex> lock_state();

private:
    friend class AgentRuntime;
    friend class Behavior;
    std::shared_ptr<detail::ExecShared> shared_;
};

// Executes a behavior as a live agent: setup, concurrent control loops, a
// mailbox listener, bounded-concurrency action dispatch, and shutdown.
class AgentRuntime {
public:
    AgentRuntime(std::shared_ptr<Behavior> behavior, std::unique_ptr<ExchangeClient> binding,
                 RuntimeOptions options = {});
    ~AgentRuntime();

    AgentRuntime(const AgentRuntime&) = delete;
    AgentRuntime& operator=(const AgentRuntime&) = delete;

    // Blocks until shutdown. Throws SetupError when on_setup fails (the
    // mailbox is closed and no loop ever starts).
    RunStatus run();

    // Identical to receiving a Shutdown envelope; idempotent.
    void self_shutdown(bool terminal = true);

    // Runs one iteration of every event loop registered for `name`.
    // Unknown names raise; firing after shutdown is a no-op.
    void fire_event(const std::string& name);

    // Dispatches one inbound envelope (the listener calls this; tests may
    // too). Never blocks on action execution.
    void handle_message(const Envelope& e);

    const EntityId& id() const { return binding_->id(); }
    ShutdownSignal shutdown_signal() const { return signal_; }
    Behavior& behavior() { return *behavior_; }
    ExchangeClient& exchange() { return *binding_; }
    std::shared_ptr<RequestPort> port() { return port_; }
    Handle handle_to(const EntityId& target);

    size_t actions_in_flight() const;

private:
    friend class AgentContext;
    friend struct detail::ExecShared;
    struct ActionPool;

    void start_loop(const std::string& name, const Behavior::LoopEntry& entry);
    void join_loops();
    void listen();

    std::shared_ptr<Behavior> behavior_;
    std::unique_ptr<ExchangeClient> binding_;
    RuntimeOptions options_;
    ShutdownSignal signal_;
    std::shared_ptr<detail::ExecShared> shared_;
    std::shared_ptr<RequestPort> port_;

    std::shared_ptr<ActionPool> pool_;

    struct LoopRun {
        std::string name;
        std::thread thread;
        std::shared_ptr<Completion<bool>> done;
    };
    std::vector<LoopRun> loop_runs_;
    std::thread listener_;
};

// Runs the behavior on the given binding until shutdown.
RunStatus run_agent(std::shared_ptr<Behavior> behavior, std::unique_ptr<ExchangeClient> binding,
                    RuntimeOptions options = {});

}  // namespace agentry
