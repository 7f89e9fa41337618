#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "agentry/runtime.hpp"

namespace agentry {

enum class AgentStatus {
    Unknown,
    Running,
    Restarting,
    Stopped,  // clean exit
    Failed,   // setup failure, loop failure, or restart budget exhausted
};

std::string_view agent_status_name(AgentStatus s);

struct LaunchSpec {
    EntityId id;
    // Registry name + opaque args; required by the subprocess launcher,
    // optional when `instance` is provided.
    std::string behavior_name;
    std::string args;
    std::shared_ptr<Behavior> instance;
    RuntimeOptions runtime;
};

// Starts agents on resources. A launcher never reuses an agent id for a
// different behavior; restarts reuse the same id with its mailbox left open.
class Launcher {
public:
    virtual ~Launcher() = default;

    virtual void launch(std::shared_ptr<ExchangeHub> hub, LaunchSpec spec) = 0;

    // Marks the agent as deliberately stopping so supervision does not
    // fight an orderly shutdown.
    virtual void request_shutdown(const EntityId& id) = 0;

    // True when the agent exited before the deadline.
    virtual bool wait_exit(const EntityId& id, std::chrono::milliseconds timeout) = 0;

    virtual AgentStatus status(const EntityId& id) = 0;

    virtual void stop_all(std::chrono::milliseconds budget) = 0;
};

// Runs agents on dedicated threads of this process.
class InProcessLauncher : public Launcher {
public:
    ~InProcessLauncher() override;

    void launch(std::shared_ptr<ExchangeHub> hub, LaunchSpec spec) override;
    void request_shutdown(const EntityId& id) override;
    bool wait_exit(const EntityId& id, std::chrono::milliseconds timeout) override;
    AgentStatus status(const EntityId& id) override;
    void stop_all(std::chrono::milliseconds budget) override;

private:
    struct Rec {
        std::thread thread;
        std::shared_ptr<Completion<RunStatus>> done;
        std::shared_ptr<std::atomic<AgentStatus>> status;
        bool joined = false;
    };
    std::mutex mu_;
    std::unordered_map<EntityId, std::shared_ptr<Rec>> agents_;
};

}  // namespace agentry
