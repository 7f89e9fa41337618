#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>
#include <variant>

#include "agentry/completion.hpp"
#include "agentry/envelope.hpp"
#include "agentry/errors.hpp"
#include "agentry/exchange.hpp"

namespace agentry {

class Handle;
class ObjectDepot;

// Terminal value of a remote action: result payload or remote failure.
class ActionResult {
public:
    static ActionResult ok_result(Payload p) { return ActionResult(std::move(p)); }
    static ActionResult err_result(ErrorInfo e) { return ActionResult(std::move(e)); }

    bool ok() const { return std::holds_alternative<Payload>(value_); }
    const Payload& payload() const { return std::get<Payload>(value_); }
    const ErrorInfo& error() const { return std::get<ErrorInfo>(value_); }

    // Inline result bytes; throws on error results or reference payloads.
    const Bytes& bytes() const;

    bool operator==(const ActionResult&) const = default;

private:
    explicit ActionResult(Payload p) : value_(std::move(p)) {}
    explicit ActionResult(ErrorInfo e) : value_(std::move(e)) {}
    std::variant<Payload, ErrorInfo> value_;
};

// Pending-request table: matches responses to the completion cells created
// at send time. A response with an unknown request id is foreign; callers
// log and drop it.
class RouterCore {
public:
    using ResultCell = std::shared_ptr<Completion<ActionResult>>;

    ResultCell add_pending(const Uuid128& request_id);
    bool complete(const Uuid128& request_id, ActionResult result);
    void forget(const Uuid128& request_id);
    void fail_all(const ErrorInfo& error);
    size_t pending_count() const;

private:
    mutable std::mutex mu_;
    std::unordered_map<Uuid128, ResultCell> pending_;
};

// What a handle needs from whoever owns the mailbox it multiplexes over:
// an identity, a way to send, the pending table, and the data plane.
// invalidate() detaches handles safely when the owner shuts down.
class RequestPort {
public:
    using SendFn = std::function<void(const Envelope&)>;

    RequestPort(EntityId self, SendFn send, ObjectDepot* depot)
        : self_(self), send_(std::move(send)), depot_(depot) {}

    const EntityId& self_id() const { return self_; }

    void send(const Envelope& e) {
        std::shared_lock lock(mu_);
        if (!valid_) throw MailboxClosedError("local mailbox is shut down");
        send_(e);
    }

    RouterCore& core() { return core_; }

    ObjectDepot* depot() {
        std::shared_lock lock(mu_);
        return valid_ ? depot_ : nullptr;
    }

    void invalidate() {
        {
            std::unique_lock lock(mu_);
            valid_ = false;
            depot_ = nullptr;
        }
        core_.fail_all({ErrorKind::MailboxClosed, "local mailbox is shut down"});
    }

private:
    EntityId self_;
    SendFn send_;
    std::shared_mutex mu_;
    ObjectDepot* depot_;
    bool valid_ = true;
    RouterCore core_;
};

// Feeds one inbound response envelope into the pending table. Returns false
// for kinds the port does not consume (requests, pings).
bool route_response(RouterCore& core, const Envelope& e);

// Client-side mailbox multiplexer: one listener thread serving every handle
// created from it, regardless of handle count.
class MailboxRouter {
public:
    explicit MailboxRouter(std::unique_ptr<ExchangeClient> binding,
                           std::chrono::milliseconds default_timeout = std::chrono::seconds(30));
    ~MailboxRouter();

    MailboxRouter(const MailboxRouter&) = delete;
    MailboxRouter& operator=(const MailboxRouter&) = delete;

    const EntityId& id() const { return binding_->id(); }
    std::shared_ptr<RequestPort> port() { return port_; }
    ExchangeClient& binding() { return *binding_; }
    std::chrono::milliseconds default_timeout() const { return default_timeout_; }

    Handle handle_to(const EntityId& target) const;

    size_t listener_count() const { return listener_running_.load() ? 1 : 0; }
    size_t pending_count() const { return port_->core().pending_count(); }

    void stop();

private:
    void listen();

    std::unique_ptr<ExchangeClient> binding_;
    std::chrono::milliseconds default_timeout_;
    std::shared_ptr<RequestPort> port_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> listener_running_{false};
    std::thread listener_;
};

}  // namespace agentry
