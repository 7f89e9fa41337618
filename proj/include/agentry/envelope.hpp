#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "agentry/errors.hpp"
#include "agentry/ids.hpp"
#include "agentry/payload.hpp"

namespace agentry {

enum class MessageKind : uint8_t {
    ActionRequest = 1,
    ActionResponse = 2,
    Ping = 3,
    PingResponse = 4,
    Shutdown = 5,
};

std::string_view message_kind_name(MessageKind k);

struct ActionRequestBody {
    std::string action;
    Payload payload;

    bool operator==(const ActionRequestBody&) const = default;
};

struct ActionResponseBody {
    Uuid128 request_id;
    // Ok carries the result payload, Err the remote failure.
    std::variant<Payload, ErrorInfo> outcome;

    bool ok() const { return std::holds_alternative<Payload>(outcome); }
    bool operator==(const ActionResponseBody&) const = default;
};

struct PingBody {
    bool operator==(const PingBody&) const = default;
};

// Acknowledges a Ping or a Shutdown; request_id names the acked message.
struct PingResponseBody {
    Uuid128 request_id;

    bool operator==(const PingResponseBody&) const = default;
};

struct ShutdownBody {
    // terminal=true closes the mailbox permanently; terminal=false leaves it
    // open for a restarted agent.
    bool terminal = true;

    bool operator==(const ShutdownBody&) const = default;
};

using EnvelopeBody =
    std::variant<ActionRequestBody, ActionResponseBody, PingBody, PingResponseBody, ShutdownBody>;

// One unit of communication between two mailboxes.
struct Envelope {
    EntityId src;
    EntityId dest;
    Uuid128 message_id;
    EnvelopeBody body = PingBody{};

    MessageKind kind() const {
        switch (body.index()) {
            case 0: return MessageKind::ActionRequest;
            case 1: return MessageKind::ActionResponse;
            case 2: return MessageKind::Ping;
            case 3: return MessageKind::PingResponse;
            default: return MessageKind::Shutdown;
        }
    }

    bool operator==(const Envelope&) const = default;
};

Envelope make_action_request(const EntityId& src, const EntityId& dest, std::string action,
                             Payload payload);
Envelope make_action_response(const EntityId& src, const EntityId& dest, const Uuid128& request_id,
                              std::variant<Payload, ErrorInfo> outcome);
Envelope make_ping(const EntityId& src, const EntityId& dest);
Envelope make_ping_response(const Envelope& request);
Envelope make_shutdown(const EntityId& src, const EntityId& dest, bool terminal);

}  // namespace agentry
