#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agentry/behavior.hpp"
#include "agentry/envelope.hpp"
#include "agentry/ids.hpp"

namespace agentry {

class ObjectDepot;

enum class MailboxState : uint8_t {
    Open = 0,
    Closed = 1,  // absorbing; a closed mailbox never reopens
};

// A single entity's binding to an exchange: its own mailbox plus the
// transport operations it may perform. recv() is single-consumer.
class ExchangeClient {
public:
    virtual ~ExchangeClient() = default;

    virtual const EntityId& id() const = 0;

    // Throws UnknownEntityError, MailboxClosedError or TransportError.
    virtual void send(const Envelope& e) = 0;

    // Dequeues the oldest envelope addressed to this entity. Throws
    // TimeoutError on expiry, MailboxClosedError once closed and drained.
    virtual Envelope recv(std::chrono::milliseconds timeout) = 0;

    virtual void close(const EntityId& target) = 0;

    virtual std::vector<EntityId> discover(std::string_view behavior_name) = 0;

    // Dataplane attachment; null when the binding has no depot.
    virtual ObjectDepot* depot() { return nullptr; }
};

// Factory side of an exchange: registers entities and produces bindings.
// register_entity alone is control-plane only (no local mailbox consumer is
// created), which lets a manager claim an id for an agent that will run in
// another process.
class ExchangeHub {
public:
    virtual ~ExchangeHub() = default;

    virtual EntityId register_entity(EntityRole role,
                                     std::optional<BehaviorSpec> spec = std::nullopt) = 0;

    // Attaches a mailbox consumer for a previously registered id.
    virtual std::unique_ptr<ExchangeClient> bind(const EntityId& id) = 0;

    std::unique_ptr<ExchangeClient> register_and_bind(
        EntityRole role, std::optional<BehaviorSpec> spec = std::nullopt) {
        return bind(register_entity(role, std::move(spec)));
    }

    virtual void close(const EntityId& id) = 0;
    virtual std::vector<EntityId> discover(std::string_view behavior_name) = 0;

    // host:port of the backing relay store, when there is one; subprocess
    // launchers require it to point children at the same exchange.
    virtual std::optional<std::string> store_endpoint() const { return std::nullopt; }
};

}  // namespace agentry
