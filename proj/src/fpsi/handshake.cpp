#include "xdup/fpsi/fpsi.hpp"

namespace xdup::fpsi {

namespace {

std::vector<std::uint8_t> encode_params(const FpsiParams& p,
                                        DistanceOtMode mode) {
    net::Writer w;
    w.u32(p.l);
    w.u32(p.tau);
    w.u64(p.nq);
    w.u64(p.nr);
    w.u8(static_cast<std::uint8_t>(mode));
    return std::move(w.buf);
}

}  // namespace

void handshake_initiate(net::Channel& ch, const std::string& protocol,
                        const FpsiParams& params, DistanceOtMode mode) {
    params.validate();
    net::Writer hello;
    hello.str(protocol);
    hello.u32(kFpsiVersion);
    ch.send_frame(net::FrameType::FPSI_HELLO, hello.buf);
    ch.send_frame(net::FrameType::FPSI_PARAMS, encode_params(params, mode));
    net::Frame ack = ch.expect(net::FrameType::FPSI_PARAMS);
    if (ack.payload != encode_params(params, mode))
        throw FpsiError("handshake: acknowledgement mismatch");
}

void handshake_respond(net::Channel& ch, const std::string& protocol,
                       const FpsiParams& params, DistanceOtMode mode) {
    params.validate();
    net::Frame hello = ch.expect(net::FrameType::FPSI_HELLO);
    net::Reader r{hello.payload};
    std::string peer_proto = r.str();
    std::uint32_t peer_version = r.u32();
    if (peer_proto != protocol) {
        ch.send_error(2, "protocol mismatch: " + peer_proto);
        throw FpsiError("handshake: protocol mismatch");
    }
    if (peer_version != kFpsiVersion) {
        ch.send_error(3, "unsupported version");
        throw FpsiError("handshake: unsupported version");
    }
    net::Frame pf = ch.expect(net::FrameType::FPSI_PARAMS);
    auto mine = encode_params(params, mode);
    if (pf.payload != mine) {
        ch.send_error(4, "parameter mismatch");
        throw FpsiError("handshake: parameter mismatch");
    }
    ch.send_frame(net::FrameType::FPSI_PARAMS, mine);
}

void check_elements(const std::vector<BitString>& set, std::uint64_t n,
                    std::uint32_t l) {
    if (set.size() != n) throw FpsiError("set size does not match parameters");
    for (const BitString& s : set)
        if (s.dimension() != l) throw FpsiError("element dimension mismatch");
}

}  // namespace xdup::fpsi
