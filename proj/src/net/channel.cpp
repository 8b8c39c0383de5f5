#include "xdup/net/channel.hpp"

#include <thread>

namespace xdup::net {

std::pair<std::unique_ptr<LoopbackChannel>, std::unique_ptr<LoopbackChannel>>
LoopbackChannel::make_pair(NetShape shape) {
    auto q_ab = std::make_shared<Queue>();
    auto q_ba = std::make_shared<Queue>();
    auto a = std::unique_ptr<LoopbackChannel>(new LoopbackChannel());
    auto b = std::unique_ptr<LoopbackChannel>(new LoopbackChannel());
    a->tx_ = q_ab;
    a->rx_ = q_ba;
    b->tx_ = q_ba;
    b->rx_ = q_ab;
    a->shape_ = shape;
    b->shape_ = shape;
    return {std::move(a), std::move(b)};
}

void LoopbackChannel::send_frame(FrameType type,
                                 std::span<const std::uint8_t> payload) {
    if (payload.size() > max_frame_) throw ProtocolError("frame too large");
    std::size_t wire_bytes = payload.size() + kFrameHeaderBytes;
    Frame f{type, std::vector<std::uint8_t>(payload.begin(), payload.end())};

    auto now = Clock::now();
    Clock::time_point deliver = now;
    {
        std::lock_guard lock(tx_->mu);
        if (shape_.shaped()) {
            // token-bucket style serialization: the link is busy for the
            // frame's transmission time, plus fixed propagation latency
            auto start = std::max(now, tx_->busy_until);
            auto tx_time = shape_.bandwidth_bits_per_s > 0
                               ? std::chrono::nanoseconds(
                                     wire_bytes * 8ull * 1'000'000'000ull /
                                     shape_.bandwidth_bits_per_s)
                               : std::chrono::nanoseconds(0);
            tx_->busy_until = start + tx_time;
            deliver = tx_->busy_until +
                      std::chrono::nanoseconds(
                          static_cast<std::uint64_t>(shape_.latency_ms * 1e6));
        }
        tx_->items.emplace_back(std::move(f), deliver);
    }
    tx_->cv.notify_one();
    stats_.bytes_sent += wire_bytes;
    stats_.frames_sent += 1;
}

void LoopbackChannel::close() {
    if (!tx_) return;
    {
        std::lock_guard lock(tx_->mu);
        tx_->closed = true;
    }
    tx_->cv.notify_all();
}

Frame LoopbackChannel::recv_frame() {
    std::unique_lock lock(rx_->mu);
    rx_->cv.wait(lock, [&] { return !rx_->items.empty() || rx_->closed; });
    if (rx_->items.empty()) throw ProtocolError("channel closed");
    auto [frame, deliver] = std::move(rx_->items.front());
    rx_->items.pop_front();
    lock.unlock();
    auto now = Clock::now();
    if (deliver > now) std::this_thread::sleep_until(deliver);
    stats_.bytes_received += frame.payload.size() + kFrameHeaderBytes;
    stats_.frames_received += 1;
    return frame;
}

}  // namespace xdup::net
