#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace agentry {

// Wire-level error classification carried inside action responses.
enum class ErrorKind : uint8_t {
    ActionRaised = 0,
    UnknownAction = 1,
    MailboxClosed = 2,
    Timeout = 3,
    TransportFailure = 4,
};

std::string_view error_kind_name(ErrorKind k);

struct ErrorInfo {
    ErrorKind kind = ErrorKind::ActionRaised;
    std::string detail;

    bool operator==(const ErrorInfo&) const = default;
    std::string to_string() const;
};

class AgentryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Destination (or own) mailbox is permanently closed.
class MailboxClosedError : public AgentryError {
public:
    using AgentryError::AgentryError;
    MailboxClosedError() : AgentryError("mailbox closed") {}
};

class TimeoutError : public AgentryError {
public:
    using AgentryError::AgentryError;
    TimeoutError() : AgentryError("timed out") {}
};

class TransportError : public AgentryError {
public:
    using AgentryError::AgentryError;
};

class UnknownEntityError : public AgentryError {
public:
    using AgentryError::AgentryError;
};

// Malformed frame; offset points at the byte where decoding failed.
class CodecError : public AgentryError {
public:
    CodecError(const std::string& what, size_t offset)
        : AgentryError(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
    explicit CodecError(const std::string& what) : AgentryError(what), offset_(0) {}
    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

// Checksum mismatch while resolving a by-reference payload.
class IntegrityError : public AgentryError {
public:
    using AgentryError::AgentryError;
};

// Maps an in-flight exception to the ErrorInfo sent back to a remote caller.
ErrorInfo error_info_from_exception(const std::exception& e);

}  // namespace agentry
