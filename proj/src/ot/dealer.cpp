#include <cstring>

#include "xdup/ot/backend.hpp"

namespace xdup::ot {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

void send_init(net::Channel& ch, const OtBatchSpec& spec, std::uint64_t seq) {
    net::Writer w;
    w.u64(seq);
    w.u64(spec.count);
    w.u32(spec.arity);
    w.u32(spec.message_bits);
    ch.send_frame(net::FrameType::OT_INIT, w.buf);
}

std::pair<OtBatchSpec, std::uint64_t> recv_init(net::Channel& ch) {
    net::Frame f = ch.expect(net::FrameType::OT_INIT);
    net::Reader r{f.payload};
    std::uint64_t seq = r.u64();
    OtBatchSpec spec;
    spec.count = r.u64();
    spec.arity = r.u32();
    spec.message_bits = r.u32();
    return {spec, seq};
}

}  // namespace

std::vector<std::vector<Payload>>& DealerLedger::materialize(
    std::uint64_t seq, const OtBatchSpec& spec) {
    auto it = batches_.find(seq);
    if (it != batches_.end() && !it->second.messages.empty())
        return it->second.messages;
    Rng rng(mix(seed_, seq));
    auto& batch = batches_[seq];
    batch.messages.resize(spec.count);
    std::size_t n_bytes = spec.message_bytes();
    std::uint8_t tail_mask =
        spec.message_bits % 8 == 0
            ? 0xFF
            : static_cast<std::uint8_t>((1u << (spec.message_bits % 8)) - 1);
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        batch.messages[i].resize(spec.arity);
        for (std::uint32_t x = 0; x < spec.arity; ++x) {
            batch.messages[i][x] = rng.bytes(n_bytes);
            batch.messages[i][x].back() &= tail_mask;
        }
    }
    return batch.messages;
}

std::vector<std::vector<Payload>> DealerLedger::fetch(std::uint64_t seq,
                                                      const OtBatchSpec& spec,
                                                      OtRole) {
    std::lock_guard lock(mu_);
    auto msgs = materialize(seq, spec);
    auto& batch = batches_[seq];
    if (!retain_ && ++batch.fetched == 2) batches_.erase(seq);
    return msgs;
}

void DealerLedger::record_choices(std::uint64_t seq,
                                  std::vector<std::uint32_t> choices) {
    if (!retain_) return;
    std::lock_guard lock(mu_);
    batches_[seq].choices = std::move(choices);
}

std::vector<std::vector<Payload>> DealerLedger::messages(
    std::uint64_t seq) const {
    std::lock_guard lock(mu_);
    auto it = batches_.find(seq);
    if (it == batches_.end()) throw OtError("ledger: unknown batch");
    return it->second.messages;
}

std::vector<std::uint32_t> DealerLedger::choices(std::uint64_t seq) const {
    std::lock_guard lock(mu_);
    auto it = batches_.find(seq);
    if (it == batches_.end()) throw OtError("ledger: unknown batch");
    return it->second.choices;
}

std::vector<std::vector<Payload>> DealerBackend::run_send(
    const OtBatchSpec& spec) {
    spec.validate();
    std::uint64_t seq = next_seq_++;
    send_init(ch_, spec, seq);
    return ledger_->fetch(seq, spec, OtRole::sender);
}

std::vector<Payload> DealerBackend::run_recv(
    const OtBatchSpec& spec, std::span<const std::uint32_t> choices) {
    spec.validate();
    validate_choices(spec, choices);
    auto [peer_spec, seq] = recv_init(ch_);
    if (next_seq_ != seq) throw OtError("dealer: batch sequence mismatch");
    ++next_seq_;
    if (peer_spec != spec) {
        ch_.send_error(1, "OT batch spec mismatch");
        throw OtError("dealer: batch spec mismatch");
    }
    auto all = ledger_->fetch(seq, spec, OtRole::receiver);
    ledger_->record_choices(seq,
                            std::vector<std::uint32_t>(choices.begin(), choices.end()));
    std::vector<Payload> out(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) out[i] = all[i][choices[i]];
    return out;
}

}  // namespace xdup::ot
