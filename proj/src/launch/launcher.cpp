#include "agentry/launch/launcher.hpp"

#include <nlohmann/json.hpp>

#include "agentry/launch/registry.hpp"
#include "agentry/log.hpp"

namespace agentry {

std::string_view agent_status_name(AgentStatus s) {
    switch (s) {
        case AgentStatus::Unknown: return "unknown";
        case AgentStatus::Running: return "running";
        case AgentStatus::Restarting: return "restarting";
        case AgentStatus::Stopped: return "stopped";
        case AgentStatus::Failed: return "failed";
    }
    return "unknown";
}

InProcessLauncher::~InProcessLauncher() {
    stop_all(std::chrono::seconds(10));
}

void InProcessLauncher::launch(std::shared_ptr<ExchangeHub> hub, LaunchSpec spec) {
    std::shared_ptr<Behavior> behavior = spec.instance;
    if (!behavior) {
        behavior = BehaviorRegistry::instance().make(spec.behavior_name, spec.args);
    }

    auto done = std::make_shared<Completion<RunStatus>>();
    auto status = std::make_shared<std::atomic<AgentStatus>>(AgentStatus::Running);

    std::thread t([hub, behavior, id = spec.id, options = spec.runtime, done, status] {
        RunStatus result;
        try {
            auto binding = hub->bind(id);
            result = run_agent(behavior, std::move(binding), options);
            status->store(result.clean() ? AgentStatus::Stopped : AgentStatus::Failed);
        } catch (const std::exception& e) {
            logging::emit({{"event", "agent-start-failed"},
                           {"agent", id.to_string()},
                           {"error", e.what()}});
            result.kind = RunStatus::Kind::LoopFailure;
            result.error = {ErrorKind::ActionRaised, e.what()};
            status->store(AgentStatus::Failed);
        }
        done->resolve(std::move(result));
    });

    std::lock_guard lock(mu_);
    auto [it, fresh] = agents_.try_emplace(spec.id);
    if (!fresh) {
        t.detach();  // should not happen: ids are launcher-unique
        throw AgentryError("agent id already launched: " + spec.id.to_string());
    }
    it->second = std::make_shared<Rec>();
    it->second->thread = std::move(t);
    it->second->done = std::move(done);
    it->second->status = std::move(status);
}

void InProcessLauncher::request_shutdown(const EntityId&) {
    // Thread agents stop via their mailbox; nothing to veto here.
}

bool InProcessLauncher::wait_exit(const EntityId& id, std::chrono::milliseconds timeout) {
    std::shared_ptr<Completion<RunStatus>> done;
    {
        std::lock_guard lock(mu_);
        auto it = agents_.find(id);
        if (it == agents_.end()) return true;
        done = it->second->done;
    }
    return done->wait_for(timeout).has_value();
}

AgentStatus InProcessLauncher::status(const EntityId& id) {
    std::lock_guard lock(mu_);
    auto it = agents_.find(id);
    if (it == agents_.end()) return AgentStatus::Unknown;
    return it->second->status->load();
}

void InProcessLauncher::stop_all(std::chrono::milliseconds budget) {
    std::vector<std::pair<EntityId, std::shared_ptr<Rec>>> live;
    {
        std::lock_guard lock(mu_);
        for (auto& [id, rec] : agents_) {
            if (!rec->joined) live.emplace_back(id, rec);
        }
    }
    auto deadline = std::chrono::steady_clock::now() + budget;
    for (auto& [id, rec] : live) {
        if (!rec->thread.joinable()) continue;
        auto now = std::chrono::steady_clock::now();
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline > now ? deadline - now : std::chrono::steady_clock::duration::zero());
        if (rec->done->wait_for(left)) {
            rec->thread.join();
            std::lock_guard lock(mu_);
            rec->joined = true;
        } else {
            logging::emit({{"event", "abandon-agent-thread"}, {"agent", id.to_string()}});
            rec->thread.detach();
            std::lock_guard lock(mu_);
            rec->joined = true;
        }
    }
}

}  // namespace agentry
