#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "agentry/router.hpp"

namespace agentry {

// Completion of one action invocation. Waiting past the deadline resolves
// the future to Err(Timeout); a response that later arrives for it is
// dropped. All waiters observe the same terminal value.
class ActionFuture {
public:
    ActionFuture(Uuid128 request_id, RouterCore::ResultCell cell,
                 std::shared_ptr<RequestPort> port, std::chrono::milliseconds default_timeout);

    const Uuid128& request_id() const { return request_id_; }

    ActionResult wait() { return wait_for(default_timeout_); }
    ActionResult wait_for(std::chrono::milliseconds timeout);
    std::optional<ActionResult> poll() const { return cell_->poll(); }
    bool done() const { return cell_->resolved(); }

    // Resolves the future to Err(Timeout, "cancelled") unless already done.
    void cancel();

private:
    Uuid128 request_id_;
    RouterCore::ResultCell cell_;
    std::shared_ptr<RequestPort> port_;
    std::chrono::milliseconds default_timeout_;
};

// Client-side reference to a remote agent. Cheap to copy; copies share the
// owning port (and thus the process's single listener). Serializable as the
// target id so handles can travel inside action payloads.
class Handle {
public:
    Handle() = default;
    Handle(EntityId target, std::shared_ptr<RequestPort> port,
           std::chrono::milliseconds default_timeout = std::chrono::seconds(30));

    const EntityId& target() const { return target_; }
    bool valid() const { return static_cast<bool>(port_); }

    std::chrono::milliseconds default_timeout() const { return default_timeout_; }
    void set_default_timeout(std::chrono::milliseconds t) { default_timeout_ = t; }

    ActionFuture invoke(std::string action, Payload args = {});
    ActionFuture invoke(std::string action, Bytes args);
    // invoke + wait.
    ActionResult call(std::string action, Payload args = {},
                      std::optional<std::chrono::milliseconds> timeout = std::nullopt);

    // Round-trip time to the agent. Throws TimeoutError / MailboxClosedError.
    std::chrono::microseconds ping(std::optional<std::chrono::milliseconds> timeout = std::nullopt);

    // terminal=true closes the mailbox permanently. With blocking, waits for
    // the acknowledgment (or mailbox closure). Repeated shutdowns are no-ops.
    void shutdown(bool terminal = true, bool blocking = true,
                  std::optional<std::chrono::milliseconds> timeout = std::nullopt);

    // Handle equality is target-id equality.
    bool operator==(const Handle& o) const { return target_ == o.target_; }

    std::string target_text() const { return target_.to_string(); }

private:
    EntityId target_;
    std::shared_ptr<RequestPort> port_;
    std::chrono::milliseconds default_timeout_{std::chrono::seconds(30)};
};

}  // namespace agentry
