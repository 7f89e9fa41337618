#include "agentry/router.hpp"

#include <nlohmann/json.hpp>

#include "agentry/handle.hpp"
#include "agentry/log.hpp"

namespace agentry {

const Bytes& ActionResult::bytes() const {
    if (!ok()) throw AgentryError("action failed: " + error().to_string());
    return payload().bytes();
}

RouterCore::ResultCell RouterCore::add_pending(const Uuid128& request_id) {
    auto cell = std::make_shared<Completion<ActionResult>>();
    std::lock_guard lock(mu_);
    pending_.emplace(request_id, cell);
    return cell;
}

bool RouterCore::complete(const Uuid128& request_id, ActionResult result) {
    ResultCell cell;
    {
        std::lock_guard lock(mu_);
        auto it = pending_.find(request_id);
        if (it == pending_.end()) return false;
        cell = std::move(it->second);
        pending_.erase(it);
    }
    cell->resolve(std::move(result));
    return true;
}

void RouterCore::forget(const Uuid128& request_id) {
    std::lock_guard lock(mu_);
    pending_.erase(request_id);
}

void RouterCore::fail_all(const ErrorInfo& error) {
    std::unordered_map<Uuid128, ResultCell> taken;
    {
        std::lock_guard lock(mu_);
        taken.swap(pending_);
    }
    for (auto& [_, cell] : taken) cell->resolve(ActionResult::err_result(error));
}

size_t RouterCore::pending_count() const {
    std::lock_guard lock(mu_);
    return pending_.size();
}

bool route_response(RouterCore& core, const Envelope& e) {
    if (const auto* resp = std::get_if<ActionResponseBody>(&e.body)) {
        ActionResult result = resp->ok()
                                  ? ActionResult::ok_result(std::get<Payload>(resp->outcome))
                                  : ActionResult::err_result(std::get<ErrorInfo>(resp->outcome));
        if (!core.complete(resp->request_id, std::move(result))) {
            logging::emit({{"event", "drop-foreign-response"},
                           {"request_id", resp->request_id.to_string()},
                           {"src", e.src.to_string()}});
        }
        return true;
    }
    if (const auto* pong = std::get_if<PingResponseBody>(&e.body)) {
        if (!core.complete(pong->request_id, ActionResult::ok_result(Payload{}))) {
            logging::emit({{"event", "drop-foreign-response"},
                           {"request_id", pong->request_id.to_string()},
                           {"src", e.src.to_string()}});
        }
        return true;
    }
    return false;
}

MailboxRouter::MailboxRouter(std::unique_ptr<ExchangeClient> binding,
                             std::chrono::milliseconds default_timeout)
    : binding_(std::move(binding)), default_timeout_(default_timeout) {
    port_ = std::make_shared<RequestPort>(
        binding_->id(), [this](const Envelope& e) { binding_->send(e); }, binding_->depot());
    listener_running_ = true;
    listener_ = std::thread([this] { listen(); });
}

MailboxRouter::~MailboxRouter() {
    stop();
}

void MailboxRouter::stop() {
    bool was = stop_.exchange(true);
    if (!was) {
        if (listener_.joinable()) listener_.join();
        port_->invalidate();
    } else if (listener_.joinable()) {
        listener_.join();
    }
}

void MailboxRouter::listen() {
    while (!stop_.load()) {
        Envelope e;
        try {
            e = binding_->recv(std::chrono::milliseconds(100));
        } catch (const TimeoutError&) {
            continue;
        } catch (const MailboxClosedError&) {
            port_->core().fail_all({ErrorKind::MailboxClosed, "own mailbox closed"});
            break;
        } catch (const std::exception& ex) {
            logging::emit({{"event", "router-recv-error"}, {"error", ex.what()}});
            continue;
        }
        if (!route_response(port_->core(), e)) {
            logging::emit({{"event", "drop-unexpected-kind"},
                           {"kind", std::string(message_kind_name(e.kind()))},
                           {"src", e.src.to_string()}});
        }
    }
    listener_running_ = false;
}

}  // namespace agentry
