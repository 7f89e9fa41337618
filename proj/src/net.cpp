#include "agentry/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace agentry::net {

namespace {

std::string errno_text(const char* op) {
    return std::string(op) + ": " + std::strerror(errno);
}

// Remaining milliseconds before deadline, clamped to >= 0.
int remaining_ms(std::chrono::steady_clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    return left.count() > 0 ? static_cast<int>(left.count()) : 0;
}

}  // namespace

std::optional<Endpoint> Endpoint::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 >= text.size()) {
        return std::nullopt;
    }
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    unsigned long port = 0;
    for (char c : text.substr(colon + 1)) {
        if (c < '0' || c > '9') return std::nullopt;
        port = port * 10 + static_cast<unsigned long>(c - '0');
        if (port > 65535) return std::nullopt;
    }
    ep.port = static_cast<uint16_t>(port);
    return ep;
}

Socket::~Socket() {
    close();
}

Socket& Socket::operator=(Socket&& o) noexcept {
    if (this != &o) {
        close();
        fd_ = o.fd_;
        o.fd_ = -1;
    }
    return *this;
}

void Socket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Socket Socket::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string port = std::to_string(ep.port);
    int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) {
        throw TransportError("resolve " + ep.to_string() + ": " + gai_strerror(rc));
    }

    std::string last_error = "no addresses";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last_error = errno_text("socket");
            continue;
        }
        int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
        rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
            if (rc == 1) {
                int err = 0;
                socklen_t len = sizeof(err);
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
                errno = err;
            } else {
                rc = -1;
                errno = rc == 0 ? ETIMEDOUT : errno;
            }
        }
        if (rc != 0) {
            last_error = errno_text("connect");
            ::close(fd);
            continue;
        }
        ::fcntl(fd, F_SETFL, flags);
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        ::freeaddrinfo(res);
        return Socket(fd);
    }
    ::freeaddrinfo(res);
    throw TransportError("connect " + ep.to_string() + ": " + last_error);
}

void Socket::send_all(const uint8_t* data, size_t len) {
    if (fd_ < 0) throw TransportError("send on closed socket");
    size_t sent = 0;
    while (sent < len) {
        ssize_t n = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("send"));
        }
        sent += static_cast<size_t>(n);
    }
}

void Socket::recv_exact(uint8_t* out, size_t len, std::chrono::milliseconds timeout) {
    if (fd_ < 0) throw TransportError("recv on closed socket");
    auto deadline = std::chrono::steady_clock::now() + timeout;
    size_t got = 0;
    while (got < len) {
        pollfd pfd{fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, remaining_ms(deadline));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("poll"));
        }
        if (rc == 0) {
            if (got == 0) throw TimeoutError();
            throw TransportError("timed out mid-message");
        }
        ssize_t n = ::recv(fd_, out + got, len - got, 0);
        if (n == 0) throw TransportError("connection closed by peer");
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("recv"));
        }
        got += static_cast<size_t>(n);
    }
}

Listener::~Listener() {
    close();
}

Listener::Listener(Listener&& o) noexcept : fd_(o.fd_), port_(o.port_) {
    o.fd_ = -1;
    o.port_ = 0;
}

Listener& Listener::operator=(Listener&& o) noexcept {
    if (this != &o) {
        close();
        fd_ = o.fd_;
        port_ = o.port_;
        o.fd_ = -1;
        o.port_ = 0;
    }
    return *this;
}

void Listener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Listener Listener::bind(const std::string& host, uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw TransportError(errno_text("socket"));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw TransportError("bad listen address: " + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        std::string err = errno_text("bind");
        ::close(fd);
        throw TransportError(err + " (" + host + ":" + std::to_string(port) + ")");
    }
    if (::listen(fd, 128) != 0) {
        std::string err = errno_text("listen");
        ::close(fd);
        throw TransportError(err);
    }

    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);

    Listener l;
    l.fd_ = fd;
    l.port_ = ntohs(bound.sin_port);
    return l;
}

std::optional<Socket> Listener::accept(std::chrono::milliseconds timeout) {
    if (fd_ < 0) throw TransportError("accept on closed listener");
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc < 0) {
        if (errno == EINTR) return std::nullopt;
        throw TransportError(errno_text("poll"));
    }
    if (rc == 0) return std::nullopt;
    int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
        if (errno == EINTR || errno == ECONNABORTED) return std::nullopt;
        throw TransportError(errno_text("accept"));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

void write_frame(Socket& s, const Bytes& payload) {
    if (payload.size() > UINT32_MAX) throw TransportError("frame too large");
    uint8_t header[4] = {static_cast<uint8_t>(payload.size() >> 24),
                         static_cast<uint8_t>(payload.size() >> 16),
                         static_cast<uint8_t>(payload.size() >> 8),
                         static_cast<uint8_t>(payload.size())};
    // Single send so concurrent writers cannot interleave a frame.
    Bytes frame;
    frame.reserve(payload.size() + 4);
    frame.insert(frame.end(), header, header + 4);
    frame.insert(frame.end(), payload.begin(), payload.end());
    s.send_all(frame);
}

std::optional<Bytes> read_frame(Socket& s, std::chrono::milliseconds timeout, size_t max_frame) {
    uint8_t header[4];
    try {
        s.recv_exact(header, 4, timeout);
    } catch (const TimeoutError&) {
        return std::nullopt;
    }
    size_t len = (static_cast<size_t>(header[0]) << 24) | (static_cast<size_t>(header[1]) << 16) |
                 (static_cast<size_t>(header[2]) << 8) | static_cast<size_t>(header[3]);
    if (len > max_frame) {
        throw TransportError("frame of " + std::to_string(len) + " bytes exceeds limit");
    }
    Bytes payload(len);
    if (len > 0) s.recv_exact(payload.data(), len, std::chrono::minutes(5));
    return payload;
}

}  // namespace agentry::net
