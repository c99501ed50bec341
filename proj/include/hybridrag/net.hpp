#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "hybridrag/core/errors.hpp"

// Minimal newline-delimited TCP plumbing for the client-engine socket.
namespace hybridrag::net {

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

inline std::string errno_text() { return std::strerror(errno); }

/// Listening socket on host:port (port 0 picks a free port).
inline Fd listen_tcp(const std::string& host, int port, int& bound_port) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd) throw Error("socket: " + errno_text());
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw Error("bad listen address " + host);
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw Error("bind " + host + ":" + std::to_string(port) + ": " + errno_text());
    if (::listen(fd.get(), 16) != 0) throw Error("listen: " + errno_text());
    socklen_t len = sizeof addr;
    ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    bound_port = ntohs(addr.sin_port);
    return fd;
}

inline Fd connect_tcp(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
        throw Error("cannot resolve " + host);
    Fd fd(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
    const int rc = fd ? ::connect(fd.get(), res->ai_addr, res->ai_addrlen) : -1;
    ::freeaddrinfo(res);
    if (rc != 0) throw Error("connect " + host + ":" + std::to_string(port) + ": " + errno_text());
    int one = 1;
    ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

/// A connected socket exchanging '\n'-terminated lines. Writes are
/// serialized; reads must come from one thread.
class LineSocket {
public:
    explicit LineSocket(Fd fd) : fd_(std::move(fd)) {}

    static LineSocket connect(const std::string& host, int port) { return LineSocket(connect_tcp(host, port)); }

    bool send_line(const std::string& line) {
        std::lock_guard lk(write_mu_);
        std::string buf = line + "\n";
        std::size_t off = 0;
        while (off < buf.size()) {
            const auto n = ::send(fd_.get(), buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
            if (n <= 0) {
                if (n < 0 && errno == EINTR) continue;
                return false;
            }
            off += static_cast<std::size_t>(n);
        }
        return true;
    }

    /// Next line, or nullopt on EOF/error/timeout (negative timeout waits forever).
    std::optional<std::string> read_line(std::chrono::milliseconds timeout = std::chrono::milliseconds{-1}) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (auto nl = buf_.find('\n'); nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                return line;
            }
            int wait_ms = -1;
            if (timeout.count() >= 0) {
                auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
                if (left.count() <= 0) return std::nullopt;
                wait_ms = static_cast<int>(left.count());
            }
            pollfd p{fd_.get(), POLLIN, 0};
            const int pr = ::poll(&p, 1, wait_ms);
            if (pr < 0 && errno == EINTR) continue;
            if (pr <= 0) return std::nullopt;
            char tmp[4096];
            const auto n = ::recv(fd_.get(), tmp, sizeof tmp, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return std::nullopt;
            buf_.append(tmp, static_cast<std::size_t>(n));
        }
    }

    /// Unblocks a reader in another thread.
    void shutdown() { ::shutdown(fd_.get(), SHUT_RDWR); }

private:
    Fd fd_;
    std::mutex write_mu_;
    std::string buf_;
};

} // namespace hybridrag::net
