#include "agentry/launch/manager.hpp"

#include <nlohmann/json.hpp>

#include "agentry/launch/registry.hpp"
#include "agentry/log.hpp"

namespace agentry {

Manager::Manager(std::shared_ptr<ExchangeHub> hub, std::chrono::milliseconds default_timeout)
    : hub_(std::move(hub)), default_timeout_(default_timeout) {
    router_ = std::make_unique<MailboxRouter>(hub_->register_and_bind(EntityRole::Client),
                                              default_timeout_);
}

Manager::~Manager() {
    shutdown_all();
    router_->stop();
    try {
        hub_->close(router_->id());
    } catch (...) {
    }
}

void Manager::add_launcher(const std::string& name, std::shared_ptr<Launcher> launcher) {
    std::lock_guard lock(mu_);
    if (launchers_.empty()) default_launcher_ = name;
    launchers_[name] = std::move(launcher);
}

std::shared_ptr<Launcher> Manager::launcher(const std::string& name) {
    std::lock_guard lock(mu_);
    auto it = launchers_.find(name.empty() ? default_launcher_ : name);
    if (it == launchers_.end()) {
        throw AgentryError("unknown launcher: " + (name.empty() ? "<default>" : name));
    }
    return it->second;
}

Handle Manager::launch(std::unique_ptr<Behavior> behavior, const std::string& launcher_name,
                       RuntimeOptions runtime) {
    LaunchSpec spec;
    spec.instance = std::move(behavior);
    spec.behavior_name = spec.instance->spec().name;
    spec.runtime = runtime;
    return do_launch(std::move(spec), launcher_name);
}

Handle Manager::launch_registered(const std::string& behavior_name, const std::string& args,
                                  const std::string& launcher_name, RuntimeOptions runtime) {
    LaunchSpec spec;
    // Instantiated once here so the behavior's declared spec can be indexed
    // at registration time; subprocess launchers rebuild it in the child.
    spec.instance = BehaviorRegistry::instance().make(behavior_name, args);
    spec.behavior_name = behavior_name;
    spec.args = args;
    spec.runtime = runtime;
    return do_launch(std::move(spec), launcher_name);
}

Handle Manager::do_launch(LaunchSpec spec, const std::string& launcher_name) {
    auto l = launcher(launcher_name);
    spec.id = hub_->register_entity(EntityRole::Agent, spec.instance->spec());
    EntityId id = spec.id;
    {
        std::lock_guard lock(mu_);
        registry_[id] = {launcher_name.empty() ? default_launcher_ : launcher_name,
                         spec.behavior_name};
    }
    l->launch(hub_, std::move(spec));
    return handle_to(id);
}

Handle Manager::handle_to(const EntityId& id) {
    return Handle(id, router_->port(), default_timeout_);
}

void Manager::shutdown_agent(const EntityId& id, bool blocking, bool terminal) {
    std::shared_ptr<Launcher> l = launcher_of(id);
    if (l) l->request_shutdown(id);
    Handle h = handle_to(id);
    try {
        h.shutdown(terminal, blocking);
    } catch (const TimeoutError&) {
        throw;
    }
    if (blocking && l) l->wait_exit(id, default_timeout_);
}

std::shared_ptr<Launcher> Manager::launcher_of(const EntityId& id) {
    std::lock_guard lock(mu_);
    auto it = registry_.find(id);
    if (it == registry_.end()) return nullptr;
    auto lit = launchers_.find(it->second.launcher);
    return lit == launchers_.end() ? nullptr : lit->second;
}

AgentStatus Manager::status(const EntityId& id) {
    auto l = launcher_of(id);
    return l ? l->status(id) : AgentStatus::Unknown;
}

std::vector<EntityId> Manager::agents() const {
    std::lock_guard lock(mu_);
    std::vector<EntityId> out;
    out.reserve(registry_.size());
    for (const auto& [id, _] : registry_) out.push_back(id);
    return out;
}

void Manager::shutdown_all(std::chrono::milliseconds budget) {
    {
        std::lock_guard lock(mu_);
        if (torn_down_) return;
        torn_down_ = true;
    }
    for (const auto& id : agents()) {
        auto l = launcher_of(id);
        if (l) l->request_shutdown(id);
        if (l && l->status(id) != AgentStatus::Running) continue;
        try {
            handle_to(id).shutdown(/*terminal=*/true, /*blocking=*/false);
        } catch (const std::exception&) {
        }
    }
    std::vector<std::shared_ptr<Launcher>> ls;
    {
        std::lock_guard lock(mu_);
        for (auto& [_, l] : launchers_) ls.push_back(l);
    }
    for (auto& l : ls) l->stop_all(budget);
}

}  // namespace agentry
