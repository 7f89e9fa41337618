#include "agentry/handle.hpp"

#include "agentry/codec.hpp"

namespace agentry {

ActionFuture::ActionFuture(Uuid128 request_id, RouterCore::ResultCell cell,
                           std::shared_ptr<RequestPort> port,
                           std::chrono::milliseconds default_timeout)
    : request_id_(request_id),
      cell_(std::move(cell)),
      port_(std::move(port)),
      default_timeout_(default_timeout) {}

ActionResult ActionFuture::wait_for(std::chrono::milliseconds timeout) {
    if (auto r = cell_->wait_for(timeout)) return *r;
    // First resolve wins: a response racing in right now still takes priority.
    cell_->resolve(ActionResult::err_result({ErrorKind::Timeout, "no response within timeout"}));
    if (port_) port_->core().forget(request_id_);
    return *cell_->poll();
}

void ActionFuture::cancel() {
    cell_->resolve(ActionResult::err_result({ErrorKind::Timeout, "cancelled"}));
    if (port_) port_->core().forget(request_id_);
}

Handle::Handle(EntityId target, std::shared_ptr<RequestPort> port,
               std::chrono::milliseconds default_timeout)
    : target_(target), port_(std::move(port)), default_timeout_(default_timeout) {}

Handle MailboxRouter::handle_to(const EntityId& target) const {
    return Handle(target, port_, default_timeout_);
}

ActionFuture Handle::invoke(std::string action, Payload args) {
    if (!port_) throw AgentryError("empty handle");
    Envelope e = make_action_request(port_->self_id(), target_, std::move(action), std::move(args));
    auto cell = port_->core().add_pending(e.message_id);
    try {
        port_->send(e);
    } catch (const MailboxClosedError& ex) {
        port_->core().forget(e.message_id);
        cell->resolve(ActionResult::err_result({ErrorKind::MailboxClosed, ex.what()}));
    } catch (const std::exception& ex) {
        port_->core().forget(e.message_id);
        cell->resolve(ActionResult::err_result({ErrorKind::TransportFailure, ex.what()}));
    }
    return ActionFuture(e.message_id, std::move(cell), port_, default_timeout_);
}

ActionFuture Handle::invoke(std::string action, Bytes args) {
    return invoke(std::move(action), Payload::inline_bytes(std::move(args)));
}

ActionResult Handle::call(std::string action, Payload args,
                          std::optional<std::chrono::milliseconds> timeout) {
    return invoke(std::move(action), std::move(args)).wait_for(timeout.value_or(default_timeout_));
}

std::chrono::microseconds Handle::ping(std::optional<std::chrono::milliseconds> timeout) {
    if (!port_) throw AgentryError("empty handle");
    Envelope e = make_ping(port_->self_id(), target_);
    auto cell = port_->core().add_pending(e.message_id);
    auto started = std::chrono::steady_clock::now();
    try {
        port_->send(e);
    } catch (...) {
        port_->core().forget(e.message_id);
        throw;
    }
    auto result = cell->wait_for(timeout.value_or(default_timeout_));
    if (!result) {
        port_->core().forget(e.message_id);
        throw TimeoutError("no ping response within timeout");
    }
    if (!result->ok()) {
        if (result->error().kind == ErrorKind::MailboxClosed) {
            throw MailboxClosedError(result->error().detail);
        }
        throw TransportError(result->error().to_string());
    }
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() -
                                                                 started);
}

void Handle::shutdown(bool terminal, bool blocking,
                      std::optional<std::chrono::milliseconds> timeout) {
    if (!port_) throw AgentryError("empty handle");
    Envelope e = make_shutdown(port_->self_id(), target_, terminal);
    auto cell = port_->core().add_pending(e.message_id);
    try {
        port_->send(e);
    } catch (const MailboxClosedError&) {
        // Already terminated; shutting down twice is not an error.
        port_->core().forget(e.message_id);
        return;
    } catch (...) {
        port_->core().forget(e.message_id);
        throw;
    }
    if (!blocking) return;
    auto result = cell->wait_for(timeout.value_or(default_timeout_));
    if (!result) {
        port_->core().forget(e.message_id);
        throw TimeoutError("no shutdown acknowledgment within timeout");
    }
    // Ok(ack) and Err(MailboxClosed) both mean the agent is gone.
}

}  // namespace agentry
