#include "xdup/net/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

namespace xdup::net {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
    throw ProtocolError(what + ": " + std::strerror(errno));
}

}  // namespace

TcpChannel::TcpChannel(int fd, NetShape shape) : fd_(fd), shape_(shape) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpChannel::~TcpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host,
                                                std::uint16_t port,
                                                NetShape shape) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
        throw ProtocolError("getaddrinfo failed for " + host);
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0) throw ProtocolError("connection refused: " + host + ":" +
                                    std::to_string(port));
    return std::make_unique<TcpChannel>(fd, shape);
}

void TcpChannel::write_all(const std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            sys_fail("send");
        }
        p += w;
        n -= static_cast<std::size_t>(w);
    }
}

void TcpChannel::read_all(std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        ssize_t r = ::recv(fd_, p, n, 0);
        if (r < 0) {
            if (errno == EINTR) continue;
            sys_fail("recv");
        }
        if (r == 0) throw ProtocolError("truncated frame: peer closed");
        p += r;
        n -= static_cast<std::size_t>(r);
    }
}

void TcpChannel::send_frame(FrameType type,
                            std::span<const std::uint8_t> payload) {
    if (payload.size() > max_frame_) throw ProtocolError("frame too large");
    std::size_t wire_bytes = payload.size() + kFrameHeaderBytes;
    if (shape_.shaped()) {
        auto now = std::chrono::steady_clock::now();
        auto start = std::max(now, busy_until_);
        auto tx_time = shape_.bandwidth_bits_per_s > 0
                           ? std::chrono::nanoseconds(wire_bytes * 8ull *
                                                      1'000'000'000ull /
                                                      shape_.bandwidth_bits_per_s)
                           : std::chrono::nanoseconds(0);
        busy_until_ = start + tx_time;
        auto release = busy_until_ + std::chrono::nanoseconds(static_cast<std::uint64_t>(
                                         shape_.latency_ms * 1e6));
        std::this_thread::sleep_until(release);
    }
    std::uint8_t header[kFrameHeaderBytes];
    std::uint32_t len = static_cast<std::uint32_t>(payload.size());
    header[0] = (len >> 24) & 0xFF;
    header[1] = (len >> 16) & 0xFF;
    header[2] = (len >> 8) & 0xFF;
    header[3] = len & 0xFF;
    header[4] = static_cast<std::uint8_t>(type);
    write_all(header, sizeof(header));
    if (!payload.empty()) write_all(payload.data(), payload.size());
    stats_.bytes_sent += wire_bytes;
    stats_.frames_sent += 1;
}

Frame TcpChannel::recv_frame() {
    std::uint8_t header[kFrameHeaderBytes];
    read_all(header, sizeof(header));
    std::uint32_t len = (static_cast<std::uint32_t>(header[0]) << 24) |
                        (static_cast<std::uint32_t>(header[1]) << 16) |
                        (static_cast<std::uint32_t>(header[2]) << 8) |
                        static_cast<std::uint32_t>(header[3]);
    if (len > max_frame_) throw ProtocolError("frame length exceeds maximum");
    Frame f{static_cast<FrameType>(header[4]), std::vector<std::uint8_t>(len)};
    if (len > 0) read_all(f.payload.data(), len);
    stats_.bytes_received += len + kFrameHeaderBytes;
    stats_.frames_received += 1;
    return f;
}

TcpListener::TcpListener(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) sys_fail("socket");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        sys_fail("bind");
    if (::listen(fd_, 16) != 0) sys_fail("listen");
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0)
        port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::unique_ptr<TcpChannel> TcpListener::accept(NetShape shape) {
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) sys_fail("accept");
    return std::make_unique<TcpChannel>(cfd, shape);
}

}  // namespace xdup::net
