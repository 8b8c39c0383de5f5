#include <bit>

#include "xdup/core/bitpack.hpp"
#include "xdup/ot/session.hpp"

namespace xdup::ot {

namespace {

bool needs_extension(const OtBatchSpec& spec) {
    return spec.message_bits > kLambdaBits;
}

OtBatchSpec base_spec(const OtBatchSpec& spec) {
    if (!needs_extension(spec)) return spec;
    return {spec.count, spec.arity, static_cast<std::uint32_t>(kLambdaBits)};
}

void mask_tail(Payload& p, std::uint32_t bits) {
    if (bits % 8 != 0)
        p.back() &= static_cast<std::uint8_t>((1u << (bits % 8)) - 1);
}

Payload expand_seed(const Payload& seed, const OtBatchSpec& spec) {
    Payload out = prf_expand(PrfKey::from_bytes(seed), spec.message_bytes());
    mask_tail(out, spec.message_bits);
    return out;
}

Payload xor_payloads(const Payload& a, const Payload& b) {
    if (a.size() != b.size()) throw OtError("payload length mismatch");
    Payload out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
    return out;
}

// masked messages travel bit-packed, chunked, terminated by OT_DONE
void send_masked(net::Channel& ch, BitWriter& w) {
    auto data = w.take();
    std::size_t off = 0;
    while (off < data.size()) {
        std::size_t take =
            std::min<std::size_t>(net::kShareChunkBytes, data.size() - off);
        ch.send_frame(net::FrameType::OT_PAYLOAD,
                      std::span(data.data() + off, take));
        off += take;
    }
    ch.send_frame(net::FrameType::OT_DONE, {});
}

std::vector<std::uint8_t> recv_masked(net::Channel& ch, std::uint64_t n_bits) {
    std::size_t expected = (n_bits + 7) / 8;
    std::vector<std::uint8_t> data;
    data.reserve(expected);
    while (data.size() < expected) {
        net::Frame f = ch.expect(net::FrameType::OT_PAYLOAD);
        data.insert(data.end(), f.payload.begin(), f.payload.end());
    }
    if (data.size() != expected) throw OtError("masked stream size mismatch");
    ch.expect(net::FrameType::OT_DONE);
    return data;
}

std::uint32_t np_bits(std::uint32_t arity) {
    return std::bit_width(arity - 1u);
}

// PRF input for the 1-of-N ciphertext pads: instance counter, then index
std::array<std::uint8_t, 10> np_encode(std::uint64_t inst, std::uint32_t x) {
    std::array<std::uint8_t, 10> enc;
    for (int i = 0; i < 8; ++i) enc[i] = (inst >> (8 * i)) & 0xFF;
    enc[8] = x & 0xFF;
    enc[9] = (x >> 8) & 0xFF;
    return enc;
}

void check_np(const OtBatchSpec& spec) {
    spec.validate();
    if (spec.message_bits > 64)
        throw OtError("1-of-N construction supports at most 64-bit messages");
    if (spec.arity > 0x10000 + 1) throw OtError("1-of-N arity too large");
}

}  // namespace

Payload CorrelationFn::apply(const Payload& m0) const {
    BitReader r{m0};
    BitWriter w;
    for (std::uint32_t v : add_const) {
        std::uint64_t x = r.get(field_bits);
        w.put((x + v) % modulus, field_bits);
    }
    return w.take();
}

OtSenderSession::OtSenderSession(net::Channel& channel,
                                 RandomOtBackend& backend,
                                 OtTranscriptStats& stats)
    : ch_(channel), backend_(backend), stats_(stats) {
    if (backend.role() != OtRole::sender)
        throw OtError("sender session needs a sender-role backend");
}

OtReceiverSession::OtReceiverSession(net::Channel& channel,
                                     RandomOtBackend& backend,
                                     OtTranscriptStats& stats)
    : ch_(channel), backend_(backend), stats_(stats) {
    if (backend.role() != OtRole::receiver)
        throw OtError("receiver session needs a receiver-role backend");
}

std::vector<std::vector<Payload>> OtSenderSession::random_ot(
    const OtBatchSpec& spec, bool record) {
    spec.validate();
    auto out = backend_.run_send(base_spec(spec));
    if (needs_extension(spec))
        for (auto& inst : out)
            for (auto& msg : inst) msg = expand_seed(msg, spec);
    if (record) stats_.ot_count_by_arity[spec.arity] += spec.count;
    return out;
}

std::vector<Payload> OtReceiverSession::random_ot(
    const OtBatchSpec& spec, std::span<const std::uint32_t> choices,
    bool record) {
    spec.validate();
    validate_choices(spec, choices);
    auto out = backend_.run_recv(base_spec(spec), choices);
    if (needs_extension(spec))
        for (auto& msg : out) msg = expand_seed(msg, spec);
    if (record) stats_.ot_count_by_arity[spec.arity] += spec.count;
    return out;
}

void OtSenderSession::chosen_ot(
    const OtBatchSpec& spec,
    const std::vector<std::vector<Payload>>& messages) {
    spec.validate();
    if (messages.size() != spec.count)
        throw OtError("message count does not match batch spec");
    auto omega = random_ot(spec, false);
    BitWriter w;
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        if (messages[i].size() != spec.arity)
            throw OtError("message arity does not match batch spec");
        for (std::uint32_t x = 0; x < spec.arity; ++x)
            w.put_bytes(xor_payloads(messages[i][x], omega[i][x]),
                        spec.message_bits);
    }
    stats_.ot_count_by_arity[spec.arity] += spec.count;
    stats_.payload_bits_sent +=
        spec.count * static_cast<std::uint64_t>(spec.arity) * spec.message_bits;
    send_masked(ch_, w);
}

std::vector<Payload> OtReceiverSession::chosen_ot(
    const OtBatchSpec& spec, std::span<const std::uint32_t> choices) {
    spec.validate();
    validate_choices(spec, choices);
    auto omega = random_ot(spec, choices, false);
    std::uint64_t total_bits =
        spec.count * static_cast<std::uint64_t>(spec.arity) * spec.message_bits;
    auto data = recv_masked(ch_, total_bits);
    BitReader r{data};
    std::vector<Payload> out(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        for (std::uint32_t x = 0; x < spec.arity; ++x) {
            Payload mu = r.get_bytes(spec.message_bits);
            if (x == choices[i]) out[i] = xor_payloads(mu, omega[i]);
        }
    }
    stats_.ot_count_by_arity[spec.arity] += spec.count;
    stats_.payload_bits_sent += total_bits;
    return out;
}

std::vector<Payload> OtSenderSession::correlated_ot(
    const OtBatchSpec& spec, std::span<const CorrelationFn> fns) {
    spec.validate();
    if (spec.arity != 2) throw OtError("correlated OT is 1-of-2 only");
    if (fns.size() != spec.count)
        throw OtError("correlation count does not match batch spec");
    auto omega = random_ot(spec, false);
    BitWriter w;
    std::vector<Payload> m0(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        m0[i] = omega[i][0];
        Payload m1 = fns[i].apply(m0[i]);
        if (m1.size() != spec.message_bytes())
            throw OtError("correlation output width mismatch");
        w.put_bytes(xor_payloads(m1, omega[i][1]), spec.message_bits);
    }
    stats_.ot_count_by_arity[spec.arity] += spec.count;
    stats_.payload_bits_sent += spec.count * std::uint64_t{spec.message_bits};
    send_masked(ch_, w);
    return m0;
}

std::vector<Payload> OtReceiverSession::correlated_ot(
    const OtBatchSpec& spec, std::span<const std::uint32_t> choices) {
    spec.validate();
    if (spec.arity != 2) throw OtError("correlated OT is 1-of-2 only");
    validate_choices(spec, choices);
    auto omega = random_ot(spec, choices, false);
    std::uint64_t total_bits = spec.count * std::uint64_t{spec.message_bits};
    auto data = recv_masked(ch_, total_bits);
    BitReader r{data};
    std::vector<Payload> out(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        Payload mu = r.get_bytes(spec.message_bits);
        out[i] = choices[i] == 0 ? omega[i] : xor_payloads(mu, omega[i]);
    }
    stats_.ot_count_by_arity[spec.arity] += spec.count;
    stats_.payload_bits_sent += total_bits;
    return out;
}

void OtSenderSession::np_chosen_ot(
    const OtBatchSpec& spec,
    const std::vector<std::vector<std::uint64_t>>& messages) {
    check_np(spec);
    if (messages.size() != spec.count)
        throw OtError("message count does not match batch spec");
    std::uint32_t t = np_bits(spec.arity);
    OtBatchSpec base{spec.count * t, 2,
                     static_cast<std::uint32_t>(kLambdaBits)};
    auto keys = backend_.run_send(base);

    std::uint64_t mask = spec.message_bits == 64
                             ? ~0ull
                             : (1ull << spec.message_bits) - 1;
    BitWriter w;
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        if (messages[i].size() != spec.arity)
            throw OtError("message arity does not match batch spec");
        std::uint64_t inst = np_instance_++;
        std::vector<Prf> f[2];
        for (int b = 0; b < 2; ++b) {
            f[b].reserve(t);
            for (std::uint32_t j = 0; j < t; ++j)
                f[b].emplace_back(PrfKey::from_bytes(keys[i * t + j][b]));
        }
        for (std::uint32_t x = 0; x < spec.arity; ++x) {
            auto enc = np_encode(inst, x);
            std::uint64_t pad = 0;
            for (std::uint32_t j = 0; j < t; ++j)
                pad += f[(x >> j) & 1][j].eval_u64(enc);
            w.put((messages[i][x] ^ pad) & mask, spec.message_bits);
        }
    }
    stats_.ot_count_by_arity[spec.arity] += spec.count;
    stats_.payload_bits_sent +=
        spec.count * static_cast<std::uint64_t>(spec.arity) * spec.message_bits;
    send_masked(ch_, w);
}

std::vector<std::uint64_t> OtReceiverSession::np_chosen_ot(
    const OtBatchSpec& spec, std::span<const std::uint32_t> choices) {
    check_np(spec);
    validate_choices(spec, choices);
    std::uint32_t t = np_bits(spec.arity);
    OtBatchSpec base{spec.count * t, 2,
                     static_cast<std::uint32_t>(kLambdaBits)};
    std::vector<std::uint32_t> base_choices(base.count);
    for (std::uint64_t i = 0; i < spec.count; ++i)
        for (std::uint32_t j = 0; j < t; ++j)
            base_choices[i * t + j] = (choices[i] >> j) & 1;
    auto keys = backend_.run_recv(base, base_choices);

    std::uint64_t total_bits =
        spec.count * static_cast<std::uint64_t>(spec.arity) * spec.message_bits;
    auto data = recv_masked(ch_, total_bits);
    std::uint64_t mask = spec.message_bits == 64
                             ? ~0ull
                             : (1ull << spec.message_bits) - 1;
    BitReader r{data};
    std::vector<std::uint64_t> out(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        std::uint64_t inst = np_instance_++;
        auto enc = np_encode(inst, choices[i]);
        std::uint64_t pad = 0;
        for (std::uint32_t j = 0; j < t; ++j)
            pad += Prf(PrfKey::from_bytes(keys[i * t + j])).eval_u64(enc);
        for (std::uint32_t x = 0; x < spec.arity; ++x) {
            std::uint64_t e = r.get(spec.message_bits);
            if (x == choices[i]) out[i] = (e ^ pad) & mask;
        }
    }
    stats_.ot_count_by_arity[spec.arity] += spec.count;
    stats_.payload_bits_sent += total_bits;
    return out;
}

}  // namespace xdup::ot
