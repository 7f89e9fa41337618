#pragma once

#include <map>
#include <memory>

#include "agentry/launch/launcher.hpp"
#include "agentry/router.hpp"

namespace agentry {

// Facade combining an exchange and one or more launchers. The manager owns
// a single client mailbox; every handle it mints multiplexes over that one
// mailbox and its one listener. Destroying the manager shuts down every
// agent it launched and releases the mailbox.
class Manager {
public:
    explicit Manager(std::shared_ptr<ExchangeHub> hub,
                     std::chrono::milliseconds default_timeout = std::chrono::seconds(30));
    ~Manager();

    Manager(const Manager&) = delete;
    Manager& operator=(const Manager&) = delete;

    // Registers a launcher; the first one becomes the default.
    void add_launcher(const std::string& name, std::shared_ptr<Launcher> launcher);

    // Launches a behavior instance (in-process launchers only).
    Handle launch(std::unique_ptr<Behavior> behavior, const std::string& launcher = {},
                  RuntimeOptions runtime = {});

    // Launches a registry behavior by name; works with any launcher.
    Handle launch_registered(const std::string& behavior_name, const std::string& args = {},
                             const std::string& launcher = {}, RuntimeOptions runtime = {});

    Handle handle_to(const EntityId& id);

    void shutdown_agent(const EntityId& id, bool blocking = true, bool terminal = true);
    void shutdown_all(std::chrono::milliseconds budget = std::chrono::seconds(15));

    AgentStatus status(const EntityId& id);
    std::vector<EntityId> agents() const;
    std::shared_ptr<Launcher> launcher_of(const EntityId& id);
    std::shared_ptr<Launcher> launcher(const std::string& name);

    ExchangeHub& hub() { return *hub_; }
    MailboxRouter& router() { return *router_; }

private:
    Handle do_launch(LaunchSpec spec, const std::string& launcher_name);

    std::shared_ptr<ExchangeHub> hub_;
    std::chrono::milliseconds default_timeout_;
    std::unique_ptr<MailboxRouter> router_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Launcher>> launchers_;
    std::string default_launcher_;
    struct Registered {
        std::string launcher;
        std::string behavior;
    };
    std::unordered_map<EntityId, Registered> registry_;
    bool torn_down_ = false;
};

}  // namespace agentry
