#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>

#include "xdup/net/frame.hpp"

namespace xdup::net {

// Bandwidth/latency emulation for benchmark runs. In-process shaping keeps
// the benchmarks portable; frames are never reordered.
struct NetShape {
    std::uint64_t bandwidth_bits_per_s = 0;  // 0 = unshaped
    double latency_ms = 0.0;

    bool shaped() const { return bandwidth_bits_per_s > 0 || latency_ms > 0; }

    static NetShape unshaped() { return {}; }
    static NetShape gigabit() { return {1'000'000'000ull, 0.5}; }
    static NetShape slow() { return {250'000'000ull, 20.0}; }
};

struct ChannelStats {
    std::uint64_t bytes_sent = 0;      // payload + header
    std::uint64_t bytes_received = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_received = 0;
};

// Ordered reliable framed channel between two protocol roles.
class Channel {
  public:
    virtual ~Channel() = default;

    virtual void send_frame(FrameType type,
                            std::span<const std::uint8_t> payload) = 0;
    virtual Frame recv_frame() = 0;

    Frame expect(FrameType type) {
        Frame f = recv_frame();
        if (f.type == FrameType::ERROR) {
            Reader r{f.payload};
            std::uint32_t code = r.u32();
            throw ProtocolError("peer error " + std::to_string(code) + ": " +
                                r.str());
        }
        if (f.type != type) throw ProtocolError("unexpected frame type");
        return f;
    }

    void send_error(std::uint32_t code, const std::string& msg) {
        Writer w;
        w.u32(code);
        w.str(msg);
        send_frame(FrameType::ERROR, w.buf);
    }

    const ChannelStats& stats() const { return stats_; }
    std::size_t max_frame() const { return max_frame_; }

  protected:
    ChannelStats stats_;
    std::size_t max_frame_ = kDefaultMaxFrame;
};

// In-process pair of endpoints backed by two queues; shaping delays
// delivery per serialization time + fixed one-way latency.
class LoopbackChannel final : public Channel {
  public:
    static std::pair<std::unique_ptr<LoopbackChannel>,
                     std::unique_ptr<LoopbackChannel>>
    make_pair(NetShape shape = NetShape::unshaped());

    ~LoopbackChannel() override { close(); }

    void send_frame(FrameType type,
                    std::span<const std::uint8_t> payload) override;
    Frame recv_frame() override;

    // wakes a peer blocked in recv_frame with "channel closed"
    void close();

  private:
    using Clock = std::chrono::steady_clock;
    struct Queue {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<std::pair<Frame, Clock::time_point>> items;
        Clock::time_point busy_until = Clock::time_point::min();
        bool closed = false;
    };

    LoopbackChannel() = default;
    std::shared_ptr<Queue> tx_, rx_;
    NetShape shape_;
};

}  // namespace xdup::net
