#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "agentry/bytes.hpp"
#include "agentry/errors.hpp"

namespace agentry::net {

struct Endpoint {
    std::string host;
    uint16_t port = 0;

    std::string to_string() const { return host + ":" + std::to_string(port); }
    static std::optional<Endpoint> parse(std::string_view text);

    bool operator==(const Endpoint&) const = default;
};

// RAII TCP connection. Blocking I/O with explicit deadlines; all failures
// surface as TransportError.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    static Socket connect(const Endpoint& ep,
                          std::chrono::milliseconds timeout = std::chrono::seconds(5));

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    void close();
    // Half-close both directions; wakes a peer blocked in read.
    void shutdown_both();

    void send_all(const uint8_t* data, size_t len);
    void send_all(const Bytes& b) { send_all(b.data(), b.size()); }

    // Reads exactly len bytes before the deadline. Throws TimeoutError when
    // nothing arrives in time, TransportError on EOF/reset.
    void recv_exact(uint8_t* out, size_t len, std::chrono::milliseconds timeout);

private:
    int fd_ = -1;
};

class Listener {
public:
    Listener() = default;
    ~Listener();
    Listener(Listener&& o) noexcept;
    Listener& operator=(Listener&& o) noexcept;
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    // port 0 binds an ephemeral port.
    static Listener bind(const std::string& host, uint16_t port);

    // nullopt on timeout.
    std::optional<Socket> accept(std::chrono::milliseconds timeout);

    uint16_t port() const { return port_; }
    bool valid() const { return fd_ >= 0; }
    void close();

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

inline constexpr size_t kDefaultMaxFrame = 1ull << 30;

// Writes a length-delimited frame: 4-byte big-endian length, then payload.
void write_frame(Socket& s, const Bytes& payload);

// Reads one complete frame payload (the length prefix is consumed and
// validated against max_frame). nullopt when the deadline passes before the
// first header byte; mid-frame timeouts are transport errors.
std::optional<Bytes> read_frame(Socket& s, std::chrono::milliseconds timeout,
                                size_t max_frame = kDefaultMaxFrame);

}  // namespace agentry::net
