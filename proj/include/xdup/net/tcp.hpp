#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "xdup/net/channel.hpp"

namespace xdup::net {

// Blocking TCP transport. Shaping, when requested, is applied in software on
// top of the socket so benchmark runs do not depend on OS traffic control.
class TcpChannel final : public Channel {
  public:
    static std::unique_ptr<TcpChannel> connect(const std::string& host,
                                               std::uint16_t port,
                                               NetShape shape = NetShape::unshaped());

    explicit TcpChannel(int fd, NetShape shape = NetShape::unshaped());
    ~TcpChannel() override;
    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    void send_frame(FrameType type,
                    std::span<const std::uint8_t> payload) override;
    Frame recv_frame() override;

  private:
    void write_all(const std::uint8_t* p, std::size_t n);
    void read_all(std::uint8_t* p, std::size_t n);

    int fd_ = -1;
    NetShape shape_;
    std::chrono::steady_clock::time_point busy_until_ =
        std::chrono::steady_clock::time_point::min();
};

class TcpListener {
  public:
    explicit TcpListener(std::uint16_t port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::unique_ptr<TcpChannel> accept(NetShape shape = NetShape::unshaped());
    std::uint16_t port() const { return port_; }
    void close();

  private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace xdup::net
