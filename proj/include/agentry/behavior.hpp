#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agentry/bytes.hpp"
#include "agentry/ids.hpp"
#include "agentry/payload.hpp"
#include "agentry/signal.hpp"

namespace agentry {

class AgentContext;

namespace detail {
struct ExecShared;
}

// Declarative description of a behavior: what an agent of this kind can do.
// ancestry[0] is the behavior's own name; the rest are its parents, nearest
// first, used for discovery by behavior name.
struct BehaviorSpec {
    std::string name;
    std::vector<std::string> ancestry;
    std::vector<std::string> actions;  // sorted
    std::vector<std::string> loops;    // sorted
    // 0 means unbounded.
    uint64_t max_action_concurrency = 0;
    bool internally_synchronized = false;

    bool operator==(const BehaviorSpec&) const = default;

    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

// True iff `name` appears in the spec's ancestry (self included).
bool behavior_is_a(const BehaviorSpec& spec, std::string_view name);

// Executable implementation of an agent: local state plus tables of actions
// and control loops. Subclasses register their entries in the constructor
// and keep state as ordinary members; instances are never shared between
// agents. Constructors must stay cheap and side-effect-free -- acquire real
// resources in on_setup().
class Behavior {
public:
    using BytesAction = std::function<Bytes(const Bytes&)>;
    using PayloadAction = std::function<Payload(const Payload&)>;
    using LoopFn = std::function<void(ShutdownSignal&)>;
    using BodyFn = std::function<void()>;

    virtual ~Behavior() = default;

    Behavior(const Behavior&) = delete;
    Behavior& operator=(const Behavior&) = delete;

    // Frozen and validated on first access.
    const BehaviorSpec& spec() const;

    virtual void on_setup() {}
    virtual void on_shutdown() {}

    // Runtime services (handles, self-shutdown, events); usable once the
    // behavior runs inside an agent.
    AgentContext ctx() const;

protected:
    explicit Behavior(std::string name, std::vector<std::string> parents = {});

    // Action whose argument is materialized to bytes (references are resolved
    // by the runtime) and whose result is re-wrapped by payload policy.
    void action(std::string name, BytesAction fn);
    // Action operating on raw payloads; received references pass through
    // untouched so they can be forwarded without re-transfer.
    void action_raw(std::string name, PayloadAction fn);

    // Control loop running for the agent's lifetime (or until it returns).
    void loop(std::string name, LoopFn fn);
    // Loop body executed every `interval` until shutdown.
    void timer(std::string name, std::chrono::milliseconds interval, BodyFn body);
    // Loop body executed once per fire_event(event_name).
    void event(std::string name, std::string event_name, BodyFn body);

    void set_max_action_concurrency(uint64_t n) { max_concurrency_ = n; }
    // Behavior takes care of its own locking; the runtime will not serialize
    // action/loop access to it.
    void set_internally_synchronized(bool v) { internally_synchronized_ = v; }

private:
    friend class AgentRuntime;
    friend struct detail::ExecShared;

    struct LoopEntry {
        enum class Kind { Plain, Timer, Event } kind = Kind::Plain;
        LoopFn plain;
        BodyFn body;
        std::chrono::milliseconds interval{0};
        std::string event_name;
    };

    struct ActionEntry {
        bool raw = false;
        BytesAction bytes_fn;
        PayloadAction payload_fn;
    };

    void check_name(const std::string& name) const;

    std::string name_;
    std::vector<std::string> parents_;
    std::map<std::string, ActionEntry> actions_;
    std::map<std::string, LoopEntry> loops_;
    uint64_t max_concurrency_ = 0;
    bool internally_synchronized_ = false;

    mutable std::optional<BehaviorSpec> frozen_;
    std::shared_ptr<detail::ExecShared> exec_;
};

}  // namespace agentry
