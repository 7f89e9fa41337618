#include "agentry/runtime.hpp"

#include <deque>

#include <nlohmann/json.hpp>

#include "agentry/dataplane.hpp"
#include "agentry/log.hpp"

namespace agentry {

namespace detail {

struct ExecShared {
    std::shared_ptr<Behavior> behavior;
    std::shared_ptr<RequestPort> port;
    std::recursive_mutex state_mu;
    bool internally_synchronized = false;
    ShutdownSignal signal;
    LoopErrorPolicy policy = LoopErrorPolicy::ShutdownOnError;
    std::chrono::milliseconds handle_timeout{30000};
    std::string agent_text;

    struct EventState {
        std::mutex mu;
        std::condition_variable cv;
        uint64_t pending = 0;
    };
    // Built before loops start; structurally immutable afterwards.
    std::unordered_map<std::string, std::vector<std::shared_ptr<EventState>>> events;

    std::mutex ctl_mu;
    bool terminal = false;
    bool mailbox_gone = false;
    bool failed = false;
    ErrorInfo failure;
    AgentRuntime* rt = nullptr;
    // Shutdown requests are acknowledged only after teardown finishes, so a
    // blocking shutdown returns with the mailbox already in its final state.
    std::vector<std::pair<EntityId, Uuid128>> shutdown_acks;

    void log(const char* event, nlohmann::json extra = nlohmann::json::object()) const {
        if (!logging::enabled()) return;
        extra["event"] = event;
        extra["agent"] = agent_text;
        logging::emit(std::move(extra));
    }

    void wake_events() {
        for (auto& [_, states] : events) {
            for (auto& st : states) st->cv.notify_all();
        }
    }

    void shutdown(bool set_terminal) {
        {
            std::lock_guard lock(ctl_mu);
            terminal = terminal || set_terminal;
        }
        signal.set();
        wake_events();
    }

    void fire_event(const std::string& name) {
        auto it = events.find(name);
        if (it == events.end()) {
            throw std::invalid_argument("unknown event: " + name);
        }
        if (signal.is_set()) return;
        for (auto& st : it->second) {
            {
                std::lock_guard lock(st->mu);
                ++st->pending;
            }
            st->cv.notify_all();
        }
    }

    void report_loop_error(const std::string& loop, const char* what) {
        log("loop-error", {{"loop", loop}, {"error", what}});
        if (policy == LoopErrorPolicy::ShutdownOnError) {
            {
                std::lock_guard lock(ctl_mu);
                if (!failed) {
                    failed = true;
                    failure = {ErrorKind::ActionRaised, "loop '" + loop + "' raised: " + what};
                }
            }
            shutdown(true);
        }
    }

    Bytes materialize(const Payload& p) {
        if (p.is_inline()) return p.bytes();
        ObjectDepot* depot = port->depot();
        if (!depot) {
            throw AgentryError("reference payload received but no data plane is attached");
        }
        return depot->resolve(p.ref());
    }

    Payload wrap(Bytes result) {
        ObjectDepot* depot = port->depot();
        if (!depot) return Payload::inline_bytes(std::move(result));
        return depot->auto_payload(std::move(result));
    }

    void respond(const Envelope& request, std::variant<Payload, ErrorInfo> outcome) {
        try {
            port->send(make_action_response(port->self_id(), request.src, request.message_id,
                                            std::move(outcome)));
        } catch (const std::exception& e) {
            log("drop-response", {{"to", request.src.to_string()}, {"error", e.what()}});
        }
    }

    void execute_action(const Envelope& env) {
        const auto& req = std::get<ActionRequestBody>(env.body);
        log("action-start", {{"action", req.action}, {"from", env.src.to_string()}});
        auto it = behavior->actions_.find(req.action);
        if (it == behavior->actions_.end()) {
            respond(env, ErrorInfo{ErrorKind::UnknownAction, req.action});
            log("action-finish", {{"action", req.action}, {"ok", false}});
            return;
        }
        const auto& entry = it->second;
        try {
            Payload out;
            if (entry.raw) {
                if (internally_synchronized) {
                    out = entry.payload_fn(req.payload);
                } else {
                    std::lock_guard guard(state_mu);
                    out = entry.payload_fn(req.payload);
                }
            } else {
                // Resolve references outside the state guard; fetches must
                // not serialize against state access.
                Bytes arg = materialize(req.payload);
                Bytes result;
                if (internally_synchronized) {
                    result = entry.bytes_fn(arg);
                } else {
                    std::lock_guard guard(state_mu);
                    result = entry.bytes_fn(arg);
                }
                out = wrap(std::move(result));
            }
            respond(env, std::move(out));
            log("action-finish", {{"action", req.action}, {"ok", true}});
        } catch (const std::exception& e) {
            // The remote caller gets the error text verbatim.
            respond(env, ErrorInfo{ErrorKind::ActionRaised, e.what()});
            log("action-finish", {{"action", req.action}, {"ok", false}, {"error", e.what()}});
        }
    }
};

}  // namespace detail

using detail::ExecShared;

// Fixed-size worker pool with one FIFO task queue: requests start in send
// order; at shutdown, in-flight actions drain and queued ones are handed
// back for rejection.
struct AgentRuntime::ActionPool {
    struct State {
        std::shared_ptr<ExecShared> shared;
        std::mutex mu;
        std::condition_variable cv;
        std::deque<Envelope> queue;
        bool stopping = false;
        std::atomic<size_t> running{0};
        size_t workers_total = 0;
        size_t workers_done = 0;
        std::condition_variable done_cv;
    };

    explicit ActionPool(std::shared_ptr<ExecShared> shared, int size)
        : state_(std::make_shared<State>()) {
        state_->shared = std::move(shared);
        state_->workers_total = static_cast<size_t>(size);
        for (int i = 0; i < size; ++i) {
            auto st = state_;
            threads_.emplace_back([st] {
                for (;;) {
                    Envelope task;
                    {
                        std::unique_lock lock(st->mu);
                        st->cv.wait(lock, [&] { return st->stopping || !st->queue.empty(); });
                        if (st->stopping) break;
                        task = std::move(st->queue.front());
                        st->queue.pop_front();
                    }
                    st->running.fetch_add(1);
                    st->shared->execute_action(task);
                    st->running.fetch_sub(1);
                }
                std::lock_guard lock(st->mu);
                ++st->workers_done;
                st->done_cv.notify_all();
            });
        }
    }

    ~ActionPool() {
        if (!stopped_) stop(std::chrono::milliseconds(5000));
    }

    bool submit(Envelope e) {
        {
            std::lock_guard lock(state_->mu);
            if (state_->stopping) return false;
            state_->queue.push_back(std::move(e));
        }
        state_->cv.notify_one();
        return true;
    }

    size_t in_flight() const { return state_->running.load(); }

    // Returns the queued-but-unstarted requests.
    std::deque<Envelope> stop(std::chrono::milliseconds budget) {
        std::deque<Envelope> rejected;
        {
            std::lock_guard lock(state_->mu);
            if (state_->stopping) return rejected;
            state_->stopping = true;
            rejected.swap(state_->queue);
        }
        stopped_ = true;
        state_->cv.notify_all();
        bool all_done;
        {
            std::unique_lock lock(state_->mu);
            all_done = state_->done_cv.wait_for(
                lock, budget, [&] { return state_->workers_done == state_->workers_total; });
        }
        if (all_done) {
            for (auto& t : threads_) t.join();
        } else {
            state_->shared->log("abandon-actions", {{"in_flight", state_->running.load()}});
            for (auto& t : threads_) t.detach();
        }
        threads_.clear();
        return rejected;
    }

    std::shared_ptr<State> state_;
    std::vector<std::thread> threads_;
    bool stopped_ = false;
};

AgentContext Behavior::ctx() const {
    if (!exec_) throw std::logic_error("behavior is not running inside an agent");
    AgentContext c;
    c.shared_ = exec_;
    return c;
}

AgentRuntime::AgentRuntime(std::shared_ptr<Behavior> behavior,
                           std::unique_ptr<ExchangeClient> binding, RuntimeOptions options)
    : behavior_(std::move(behavior)), binding_(std::move(binding)), options_(options) {
    shared_ = std::make_shared<ExecShared>();
    shared_->behavior = behavior_;
    shared_->internally_synchronized = behavior_->spec().internally_synchronized;
    shared_->signal = signal_;
    shared_->policy = options_.loop_error_policy;
    shared_->handle_timeout = options_.handle_timeout;
    shared_->agent_text = binding_->id().to_string();
    shared_->rt = this;
    port_ = std::make_shared<RequestPort>(
        binding_->id(), [b = binding_.get()](const Envelope& e) { b->send(e); },
        binding_->depot());
    shared_->port = port_;
    behavior_->exec_ = shared_;
}

AgentRuntime::~AgentRuntime() {
    {
        std::lock_guard lock(shared_->ctl_mu);
        shared_->rt = nullptr;
    }
    port_->invalidate();
    if (pool_) pool_->stop(options_.join_budget);
    if (listener_.joinable()) listener_.join();
    join_loops();
}

void AgentRuntime::self_shutdown(bool terminal) {
    shared_->shutdown(terminal);
}

void AgentRuntime::fire_event(const std::string& name) {
    shared_->fire_event(name);
}

Handle AgentRuntime::handle_to(const EntityId& target) {
    return Handle(target, port_, options_.handle_timeout);
}

size_t AgentRuntime::actions_in_flight() const {
    return pool_ ? pool_->in_flight() : 0;
}

void AgentRuntime::handle_message(const Envelope& e) {
    switch (e.kind()) {
        case MessageKind::Ping: {
            try {
                binding_->send(make_ping_response(e));
            } catch (const std::exception& ex) {
                shared_->log("drop-response", {{"error", ex.what()}});
            }
            return;
        }
        case MessageKind::Shutdown: {
            const auto& body = std::get<ShutdownBody>(e.body);
            {
                std::lock_guard lock(shared_->ctl_mu);
                shared_->shutdown_acks.emplace_back(e.src, e.message_id);
            }
            shared_->shutdown(body.terminal);
            return;
        }
        case MessageKind::ActionRequest: {
            if (!pool_ || !pool_->submit(e)) {
                bool terminal;
                {
                    std::lock_guard lock(shared_->ctl_mu);
                    terminal = shared_->terminal;
                }
                if (terminal) {
                    shared_->respond(
                        e, ErrorInfo{ErrorKind::MailboxClosed, "agent shut down before execution"});
                }
                // Non-terminal shutdown: leave unanswered; the restarted
                // agent's mailbox still holds undelivered traffic and the
                // caller's retry path covers the rest.
            }
            return;
        }
        case MessageKind::ActionResponse:
        case MessageKind::PingResponse:
            route_response(port_->core(), e);
            return;
    }
    shared_->log("drop-unhandled", {{"kind", std::string(message_kind_name(e.kind()))}});
}

void AgentRuntime::listen() {
    while (!signal_.is_set()) {
        Envelope e;
        try {
            e = binding_->recv(options_.listener_poll);
        } catch (const TimeoutError&) {
            continue;
        } catch (const MailboxClosedError&) {
            {
                std::lock_guard lock(shared_->ctl_mu);
                shared_->mailbox_gone = true;
            }
            shared_->shutdown(true);
            break;
        } catch (const std::exception& ex) {
            shared_->log("listener-error", {{"error", ex.what()}});
            signal_.wait_for(std::chrono::milliseconds(50));
            continue;
        }
        handle_message(e);
    }
}

void AgentRuntime::start_loop(const std::string& name, const Behavior::LoopEntry& entry) {
    auto done = std::make_shared<Completion<bool>>();
    auto sh = shared_;
    std::thread t;
    switch (entry.kind) {
        case Behavior::LoopEntry::Kind::Plain: {
            t = std::thread([sh, name, fn = entry.plain, done] {
                sh->log("loop-start", {{"loop", name}});
                try {
                    ShutdownSignal signal = sh->signal;
                    fn(signal);
                } catch (const std::exception& e) {
                    sh->report_loop_error(name, e.what());
                }
                sh->log("loop-exit", {{"loop", name}});
                done->resolve(true);
            });
            break;
        }
        case Behavior::LoopEntry::Kind::Timer: {
            t = std::thread([sh, name, interval = entry.interval, body = entry.body, done] {
                sh->log("loop-start", {{"loop", name}});
                auto next = std::chrono::steady_clock::now() + interval;
                for (;;) {
                    auto now = std::chrono::steady_clock::now();
                    if (next > now) {
                        auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next - now);
                        if (sh->signal.wait_for(wait)) break;
                        if (std::chrono::steady_clock::now() < next) continue;
                    }
                    if (sh->signal.is_set()) break;
                    try {
                        if (sh->internally_synchronized) {
                            body();
                        } else {
                            std::lock_guard guard(sh->state_mu);
                            body();
                        }
                    } catch (const std::exception& e) {
                        sh->report_loop_error(name, e.what());
                        break;
                    }
                    next += interval;
                }
                sh->log("loop-exit", {{"loop", name}});
                done->resolve(true);
            });
            break;
        }
        case Behavior::LoopEntry::Kind::Event: {
            auto st = std::make_shared<ExecShared::EventState>();
            shared_->events[entry.event_name].push_back(st);
            t = std::thread([sh, name, st, body = entry.body, done] {
                sh->log("loop-start", {{"loop", name}});
                for (;;) {
                    {
                        std::unique_lock lock(st->mu);
                        // Timed wait re-checks the shutdown signal to close
                        // the two-mutex wakeup race.
                        st->cv.wait_for(lock, std::chrono::milliseconds(250), [&] {
                            return st->pending > 0 || sh->signal.is_set();
                        });
                        if (st->pending == 0) {
                            if (sh->signal.is_set()) break;
                            continue;
                        }
                        --st->pending;
                    }
                    try {
                        if (sh->internally_synchronized) {
                            body();
                        } else {
                            std::lock_guard guard(sh->state_mu);
                            body();
                        }
                    } catch (const std::exception& e) {
                        sh->report_loop_error(name, e.what());
                        break;
                    }
                }
                sh->log("loop-exit", {{"loop", name}});
                done->resolve(true);
            });
            break;
        }
    }
    loop_runs_.push_back(LoopRun{name, std::move(t), std::move(done)});
}

void AgentRuntime::join_loops() {
    auto deadline = std::chrono::steady_clock::now() + options_.join_budget;
    for (auto& run : loop_runs_) {
        if (!run.thread.joinable()) continue;
        auto now = std::chrono::steady_clock::now();
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline > now ? deadline - now : std::chrono::steady_clock::duration::zero());
        if (run.done->wait_for(remaining)) {
            run.thread.join();
        } else {
            shared_->log("abandon-loop", {{"loop", run.name}});
            run.thread.detach();
        }
    }
    loop_runs_.clear();
}

RunStatus AgentRuntime::run() {
    shared_->log("setup", {{"behavior", behavior_->spec().name}});
    try {
        behavior_->on_setup();
    } catch (const std::exception& e) {
        shared_->log("setup-failed", {{"error", e.what()}});
        try {
            binding_->close(id());
        } catch (...) {
        }
        port_->invalidate();
        throw SetupError(std::string("on_setup failed: ") + e.what());
    }

    int pool_size = options_.action_pool_size;
    if (pool_size <= 0) {
        uint64_t m = behavior_->spec().max_action_concurrency;
        pool_size = m > 0 ? static_cast<int>(std::min<uint64_t>(m, 256)) : 4;
    }
    pool_ = std::make_shared<ActionPool>(shared_, pool_size);

    if (!signal_.is_set()) {
        for (const auto& [name, entry] : behavior_->loops_) start_loop(name, entry);
        listener_ = std::thread([this] { listen(); });
    }

    signal_.wait();

    if (listener_.joinable()) listener_.join();
    join_loops();
    auto rejected = pool_->stop(options_.join_budget);

    bool terminal;
    bool gone;
    {
        std::lock_guard lock(shared_->ctl_mu);
        terminal = shared_->terminal;
        gone = shared_->mailbox_gone;
        shared_->rt = nullptr;
    }
    if (terminal) {
        for (const auto& e : rejected) {
            shared_->respond(e,
                             ErrorInfo{ErrorKind::MailboxClosed, "agent shut down before execution"});
        }
    }

    try {
        behavior_->on_shutdown();
    } catch (const std::exception& e) {
        shared_->log("on-shutdown-error", {{"error", e.what()}});
    }

    port_->invalidate();
    if (terminal && !gone) {
        try {
            binding_->close(id());
        } catch (...) {
        }
    }

    std::vector<std::pair<EntityId, Uuid128>> acks;
    {
        std::lock_guard lock(shared_->ctl_mu);
        acks.swap(shared_->shutdown_acks);
    }
    for (const auto& [requester, request_id] : acks) {
        Envelope ack;
        ack.src = id();
        ack.dest = requester;
        ack.message_id = Uuid128::random();
        ack.body = PingResponseBody{request_id};
        try {
            binding_->send(ack);
        } catch (const std::exception& e) {
            shared_->log("drop-response", {{"error", e.what()}});
        }
    }

    RunStatus status;
    {
        std::lock_guard lock(shared_->ctl_mu);
        if (shared_->failed) {
            status.kind = RunStatus::Kind::LoopFailure;
            status.error = shared_->failure;
        }
    }
    shared_->log("shutdown", {{"clean", status.clean()}, {"terminal", terminal}});
    return status;
}

const EntityId& AgentContext::self_id() const {
    return shared_->port->self_id();
}

Handle AgentContext::handle_to(const EntityId& target) const {
    return Handle(target, shared_->port, shared_->handle_timeout);
}

ObjectDepot* AgentContext::depot() const {
    return shared_->port->depot();
}

void AgentContext::self_shutdown(bool terminal) {
    shared_->shutdown(terminal);
}

void AgentContext::fire_event(const std::string& name) {
    shared_->fire_event(name);
}

ShutdownSignal AgentContext::shutdown_signal() const {
    return shared_->signal;
}

std::vector<EntityId> AgentContext::discover(std::string_view behavior_name) const {
    std::lock_guard lock(shared_->ctl_mu);
    if (!shared_->rt) throw AgentryError("agent is not running");
    return shared_->rt->binding_->discover(behavior_name);
}

Bytes AgentContext::materialize(const Payload& p) const {
    return shared_->materialize(p);
}

Payload AgentContext::wrap(Bytes result) const {
    return shared_->wrap(std::move(result));
}

std::unique_lock<std::recursive_mutex> AgentContext::lock_state() {
    return std::unique_lock<std::recursive_mutex>(shared_->state_mu);
}

RunStatus run_agent(std::shared_ptr<Behavior> behavior, std::unique_ptr<ExchangeClient> binding,
                    RuntimeOptions options) {
    AgentRuntime rt(std::move(behavior), std::move(binding), options);
    return rt.run();
}

}  // namespace agentry
