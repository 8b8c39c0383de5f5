#include <sodium.h>

#include <cstring>

#include "xdup/ot/backend.hpp"

namespace xdup::ot {

namespace {

constexpr std::size_t kPoint = crypto_core_ristretto255_BYTES;
constexpr std::size_t kScalar = crypto_core_ristretto255_SCALARBYTES;

void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw OtError("libsodium init failed");
}

using Scalar = std::array<std::uint8_t, kScalar>;
using Point = std::array<std::uint8_t, kPoint>;

Scalar random_scalar(Rng& rng) {
    std::uint8_t wide[64];
    auto bytes = rng.bytes(sizeof(wide));
    std::memcpy(wide, bytes.data(), sizeof(wide));
    Scalar s;
    crypto_core_ristretto255_scalar_reduce(s.data(), wide);
    return s;
}

Scalar scalar_from_u32(std::uint32_t v) {
    Scalar s{};
    for (int i = 0; i < 4; ++i) s[i] = (v >> (8 * i)) & 0xFF;
    return s;
}

// H(point, seq, instance, index) truncated to the message width
Payload derive_message(const Point& p, std::uint64_t seq, std::uint64_t inst,
                       std::uint32_t index, const OtBatchSpec& spec) {
    std::uint8_t input[kPoint + 8 + 8 + 4];
    std::memcpy(input, p.data(), kPoint);
    for (int i = 0; i < 8; ++i) input[kPoint + i] = (seq >> (8 * i)) & 0xFF;
    for (int i = 0; i < 8; ++i) input[kPoint + 8 + i] = (inst >> (8 * i)) & 0xFF;
    for (int i = 0; i < 4; ++i)
        input[kPoint + 16 + i] = (index >> (8 * i)) & 0xFF;
    std::uint8_t digest[32];
    crypto_generichash(digest, sizeof(digest), input, sizeof(input), nullptr, 0);
    Payload out(spec.message_bytes());
    std::memcpy(out.data(), digest, out.size());
    if (spec.message_bits % 8 != 0)
        out.back() &= static_cast<std::uint8_t>((1u << (spec.message_bits % 8)) - 1);
    return out;
}

void send_init(net::Channel& ch, const OtBatchSpec& spec, std::uint64_t seq) {
    net::Writer w;
    w.u64(seq);
    w.u64(spec.count);
    w.u32(spec.arity);
    w.u32(spec.message_bits);
    ch.send_frame(net::FrameType::OT_INIT, w.buf);
}

void check_native(const OtBatchSpec& spec) {
    spec.validate();
    if (spec.message_bits > GroupBackend::kMaxNativeBits)
        throw OtError("group backend: message too long, use PRF extension");
}

// B points can outgrow the frame limit for big batches; chunk them.
void send_chunked(net::Channel& ch, net::FrameType type,
                  const std::vector<std::uint8_t>& data) {
    std::size_t off = 0;
    do {
        std::size_t take =
            std::min<std::size_t>(net::kShareChunkBytes, data.size() - off);
        ch.send_frame(type, std::span(data.data() + off, take));
        off += take;
    } while (off < data.size());
}

std::vector<std::uint8_t> recv_chunked(net::Channel& ch, net::FrameType type,
                                       std::size_t expected) {
    std::vector<std::uint8_t> out;
    out.reserve(expected);
    while (out.size() < expected) {
        net::Frame f = ch.expect(type);
        out.insert(out.end(), f.payload.begin(), f.payload.end());
    }
    if (out.size() != expected) throw OtError("group backend: bad chunk size");
    return out;
}

}  // namespace

std::vector<std::vector<Payload>> GroupBackend::run_send(
    const OtBatchSpec& spec) {
    ensure_sodium();
    check_native(spec);
    std::uint64_t seq = next_seq_++;
    send_init(ch_, spec, seq);

    Scalar a = random_scalar(rng_);
    Point A;
    if (crypto_scalarmult_ristretto255_base(A.data(), a.data()) != 0)
        throw OtError("group backend: bad sender scalar");
    ch_.send_frame(net::FrameType::OT_BASE_MSG1, A);

    // T = a*A, subtracted per message index
    Point T;
    if (crypto_scalarmult_ristretto255(T.data(), a.data(), A.data()) != 0)
        throw OtError("group backend: scalarmult failed");

    auto b_points = recv_chunked(ch_, net::FrameType::OT_BASE_MSG2,
                                 spec.count * kPoint);

    std::vector<std::vector<Payload>> out(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        Point B;
        std::memcpy(B.data(), b_points.data() + i * kPoint, kPoint);
        Point P;  // a*B - x*T
        if (crypto_scalarmult_ristretto255(P.data(), a.data(), B.data()) != 0)
            throw OtError("group backend: invalid receiver point");
        out[i].resize(spec.arity);
        for (std::uint32_t x = 0; x < spec.arity; ++x) {
            out[i][x] = derive_message(P, seq, i, x, spec);
            if (x + 1 < spec.arity &&
                crypto_core_ristretto255_sub(P.data(), P.data(), T.data()) != 0)
                throw OtError("group backend: point subtraction failed");
        }
    }
    return out;
}

std::vector<Payload> GroupBackend::run_recv(
    const OtBatchSpec& spec, std::span<const std::uint32_t> choices) {
    ensure_sodium();
    check_native(spec);
    validate_choices(spec, choices);

    net::Frame f = ch_.expect(net::FrameType::OT_INIT);
    net::Reader r{f.payload};
    std::uint64_t seq = r.u64();
    OtBatchSpec peer{r.u64(), r.u32(), r.u32()};
    if (seq != next_seq_ || peer != spec) {
        ch_.send_error(1, "OT batch spec mismatch");
        throw OtError("group backend: batch spec mismatch");
    }
    ++next_seq_;

    net::Frame fa = ch_.expect(net::FrameType::OT_BASE_MSG1);
    if (fa.payload.size() != kPoint) throw OtError("bad base point");
    Point A;
    std::memcpy(A.data(), fa.payload.data(), kPoint);

    // B_i = c_i*A + b_i*G; the wire bytes are one fixed-width point per
    // instance, independent of the choices
    std::vector<std::uint8_t> b_points(spec.count * kPoint);
    std::vector<Payload> out(spec.count);
    std::vector<Scalar> bs(spec.count);
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        bs[i] = random_scalar(rng_);
        Point bG;
        if (crypto_scalarmult_ristretto255_base(bG.data(), bs[i].data()) != 0)
            throw OtError("group backend: bad receiver scalar");
        Point B = bG;
        if (choices[i] != 0) {
            Point cA;
            Scalar c = scalar_from_u32(choices[i]);
            if (crypto_scalarmult_ristretto255(cA.data(), c.data(), A.data()) != 0)
                throw OtError("group backend: scalarmult failed");
            if (crypto_core_ristretto255_add(B.data(), cA.data(), bG.data()) != 0)
                throw OtError("group backend: point addition failed");
        }
        std::memcpy(b_points.data() + i * kPoint, B.data(), kPoint);
    }
    send_chunked(ch_, net::FrameType::OT_BASE_MSG2, b_points);

    for (std::uint64_t i = 0; i < spec.count; ++i) {
        Point shared;
        if (crypto_scalarmult_ristretto255(shared.data(), bs[i].data(),
                                           A.data()) != 0)
            throw OtError("group backend: scalarmult failed");
        out[i] = derive_message(shared, seq, i, choices[i], spec);
    }
    return out;
}

}  // namespace xdup::ot
