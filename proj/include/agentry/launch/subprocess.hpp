#pragma once

#include <sys/types.h>

#include <filesystem>
#include <list>

#include "agentry/launch/launcher.hpp"

namespace agentry {

struct SubprocessOptions {
    // Host binary executed per agent; it must call run_child_from_env()
    // with a registry containing the behavior. Empty: "agentry-agent"
    // next to the current executable.
    std::filesystem::path child_binary;
    int max_restarts = 3;
    std::chrono::milliseconds backoff_initial{250};
    std::chrono::milliseconds backoff_cap{10000};
    bool child_direct_listen = true;
    std::vector<std::pair<std::string, std::string>> extra_env;
};

// Runs each agent in its own supervised child process. Children that exit
// abnormally (nonzero status or a signal) are relaunched with the same id
// after an exponential backoff, up to max_restarts; the mailbox stays open
// across restarts so queued messages reach the replacement. Exhausting the
// budget marks the agent failed and closes its mailbox terminally.
class SubprocessLauncher : public Launcher {
public:
    explicit SubprocessLauncher(SubprocessOptions options = {});
    ~SubprocessLauncher() override;

    void launch(std::shared_ptr<ExchangeHub> hub, LaunchSpec spec) override;
    void request_shutdown(const EntityId& id) override;
    bool wait_exit(const EntityId& id, std::chrono::milliseconds timeout) override;
    AgentStatus status(const EntityId& id) override;
    void stop_all(std::chrono::milliseconds budget) override;

    // Test hook for fault injection.
    std::optional<pid_t> pid(const EntityId& id);
    int restarts(const EntityId& id);

    static std::filesystem::path default_child_binary();

private:
    struct Child {
        std::mutex mu;
        pid_t pid = -1;
        AgentStatus status = AgentStatus::Running;
        int restarts = 0;
        bool stop_requested = false;
        std::shared_ptr<Completion<bool>> exited = std::make_shared<Completion<bool>>();
        std::thread supervisor;
    };

    pid_t spawn(const LaunchSpec& spec, const std::string& store_endpoint);
    void supervise(std::shared_ptr<Child> child, std::shared_ptr<ExchangeHub> hub,
                   LaunchSpec spec, std::string store_endpoint);

    SubprocessOptions options_;
    std::mutex mu_;
    std::unordered_map<EntityId, std::shared_ptr<Child>> children_;
};

}  // namespace agentry
