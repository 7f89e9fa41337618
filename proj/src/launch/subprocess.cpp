#include "agentry/launch/subprocess.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>

#include <nlohmann/json.hpp>

#include "agentry/log.hpp"

extern char** environ;

namespace agentry {

SubprocessLauncher::SubprocessLauncher(SubprocessOptions options) : options_(std::move(options)) {
    if (options_.child_binary.empty()) {
        options_.child_binary = default_child_binary();
    }
}

SubprocessLauncher::~SubprocessLauncher() {
    stop_all(std::chrono::seconds(15));
}

std::filesystem::path SubprocessLauncher::default_child_binary() {
    std::error_code ec;
    auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (ec) return "agentry-agent";
    return self.parent_path() / "agentry-agent";
}

pid_t SubprocessLauncher::spawn(const LaunchSpec& spec, const std::string& store_endpoint) {
    std::vector<std::string> env_strings;
    for (char** e = environ; *e; ++e) {
        if (std::strncmp(*e, "AGENTRY_STORE_ENDPOINT=", 23) == 0) continue;
        if (std::strncmp(*e, "AGENTRY_AGENT_ID=", 17) == 0) continue;
        if (std::strncmp(*e, "AGENTRY_BEHAVIOR=", 17) == 0) continue;
        if (std::strncmp(*e, "AGENTRY_BEHAVIOR_ARGS=", 22) == 0) continue;
        if (std::strncmp(*e, "AGENTRY_DIRECT=", 15) == 0) continue;
        bool extra_overridden = false;
        for (const auto& [k, v] : options_.extra_env) {
            if (std::strncmp(*e, (k + "=").c_str(), k.size() + 1) == 0) {
                extra_overridden = true;
                break;
            }
        }
        if (extra_overridden) continue;
        env_strings.emplace_back(*e);
    }
    env_strings.push_back("AGENTRY_STORE_ENDPOINT=" + store_endpoint);
    env_strings.push_back("AGENTRY_AGENT_ID=" + spec.id.to_string());
    env_strings.push_back("AGENTRY_BEHAVIOR=" + spec.behavior_name);
    env_strings.push_back("AGENTRY_BEHAVIOR_ARGS=" + spec.args);
    env_strings.push_back(std::string("AGENTRY_DIRECT=") +
                          (options_.child_direct_listen ? "1" : "0"));
    for (const auto& [k, v] : options_.extra_env) env_strings.push_back(k + "=" + v);

    std::vector<char*> envp;
    envp.reserve(env_strings.size() + 1);
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);

    std::string binary = options_.child_binary.string();
    char* argv[] = {binary.data(), nullptr};

    pid_t pid = -1;
    int rc = ::posix_spawn(&pid, binary.c_str(), nullptr, nullptr, argv, envp.data());
    if (rc != 0) {
        throw AgentryError("cannot spawn " + binary + ": " + std::strerror(rc));
    }
    return pid;
}

void SubprocessLauncher::launch(std::shared_ptr<ExchangeHub> hub, LaunchSpec spec) {
    auto store = hub->store_endpoint();
    if (!store) {
        throw AgentryError("subprocess launcher requires a distributed exchange");
    }
    if (spec.behavior_name.empty()) {
        throw AgentryError("subprocess launcher requires a registered behavior name");
    }

    auto child = std::make_shared<Child>();
    {
        std::lock_guard lock(mu_);
        if (children_.count(spec.id)) {
            throw AgentryError("agent id already launched: " + spec.id.to_string());
        }
        children_.emplace(spec.id, child);
    }
    child->pid = spawn(spec, *store);
    child->supervisor = std::thread([this, child, hub, spec, store = *store] {
        supervise(child, hub, spec, store);
    });
}

void SubprocessLauncher::supervise(std::shared_ptr<Child> child, std::shared_ptr<ExchangeHub> hub,
                                   LaunchSpec spec, std::string store_endpoint) {
    auto backoff = options_.backoff_initial;
    for (;;) {
        pid_t pid;
        {
            std::lock_guard lock(child->mu);
            pid = child->pid;
        }
        int wstatus = 0;
        pid_t rc = ::waitpid(pid, &wstatus, 0);
        bool clean = rc == pid && WIFEXITED(wstatus) && WEXITSTATUS(wstatus) == 0;

        std::unique_lock lock(child->mu);
        if (clean || child->stop_requested) {
            child->status = AgentStatus::Stopped;
            break;
        }
        if (child->restarts >= options_.max_restarts) {
            child->status = AgentStatus::Failed;
            lock.unlock();
            logging::emit({{"event", "agent-failed"},
                           {"agent", spec.id.to_string()},
                           {"restarts", options_.max_restarts}});
            try {
                hub->close(spec.id);
            } catch (const std::exception& e) {
                logging::emit({{"event", "close-failed"}, {"error", e.what()}});
            }
            child->exited->resolve(true);
            return;
        }
        child->restarts += 1;
        child->status = AgentStatus::Restarting;
        lock.unlock();

        logging::emit({{"event", "agent-restart"},
                       {"agent", spec.id.to_string()},
                       {"attempt", child->restarts},
                       {"backoff_ms", backoff.count()}});
        auto deadline = std::chrono::steady_clock::now() + backoff;
        while (std::chrono::steady_clock::now() < deadline) {
            {
                std::lock_guard g(child->mu);
                if (child->stop_requested) {
                    child->status = AgentStatus::Stopped;
                    child->exited->resolve(true);
                    return;
                }
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        backoff = std::min(backoff * 2, options_.backoff_cap);

        try {
            pid_t next = spawn(spec, store_endpoint);
            std::lock_guard g(child->mu);
            child->pid = next;
            child->status = AgentStatus::Running;
        } catch (const std::exception& e) {
            std::lock_guard g(child->mu);
            child->status = AgentStatus::Failed;
            logging::emit({{"event", "agent-respawn-failed"}, {"error", e.what()}});
            break;
        }
    }
    child->exited->resolve(true);
}

void SubprocessLauncher::request_shutdown(const EntityId& id) {
    std::lock_guard lock(mu_);
    auto it = children_.find(id);
    if (it == children_.end()) return;
    std::lock_guard g(it->second->mu);
    it->second->stop_requested = true;
}

bool SubprocessLauncher::wait_exit(const EntityId& id, std::chrono::milliseconds timeout) {
    std::shared_ptr<Child> child;
    {
        std::lock_guard lock(mu_);
        auto it = children_.find(id);
        if (it == children_.end()) return true;
        child = it->second;
    }
    return child->exited->wait_for(timeout).has_value();
}

AgentStatus SubprocessLauncher::status(const EntityId& id) {
    std::lock_guard lock(mu_);
    auto it = children_.find(id);
    if (it == children_.end()) return AgentStatus::Unknown;
    std::lock_guard g(it->second->mu);
    return it->second->status;
}

std::optional<pid_t> SubprocessLauncher::pid(const EntityId& id) {
    std::lock_guard lock(mu_);
    auto it = children_.find(id);
    if (it == children_.end()) return std::nullopt;
    std::lock_guard g(it->second->mu);
    return it->second->pid;
}

int SubprocessLauncher::restarts(const EntityId& id) {
    std::lock_guard lock(mu_);
    auto it = children_.find(id);
    if (it == children_.end()) return 0;
    std::lock_guard g(it->second->mu);
    return it->second->restarts;
}

void SubprocessLauncher::stop_all(std::chrono::milliseconds budget) {
    std::unordered_map<EntityId, std::shared_ptr<Child>> taken;
    {
        std::lock_guard lock(mu_);
        taken.swap(children_);
    }
    for (auto& [id, child] : taken) {
        std::lock_guard g(child->mu);
        child->stop_requested = true;
    }
    auto deadline = std::chrono::steady_clock::now() + budget;
    for (auto& [id, child] : taken) {
        auto now = std::chrono::steady_clock::now();
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline > now ? deadline - now : std::chrono::steady_clock::duration::zero());
        if (!child->exited->wait_for(left)) {
            pid_t pid;
            {
                std::lock_guard g(child->mu);
                pid = child->pid;
            }
            if (pid > 0) ::kill(pid, SIGKILL);
            child->exited->wait_for(std::chrono::seconds(5));
        }
        if (child->supervisor.joinable()) child->supervisor.join();
    }
}

}  // namespace agentry
