#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace xdup::net {

// Wire frame: 4-byte big-endian payload length, 1-byte type, payload.
inline constexpr std::size_t kFrameHeaderBytes = 5;
inline constexpr std::size_t kDefaultMaxFrame = 64ull << 20;
inline constexpr std::size_t kShareChunkBytes = 4ull << 20;

enum class FrameType : std::uint8_t {
    HELLO = 0x01,
    PARAMS = 0x02,
    OT_INIT = 0x10,
    OT_BASE_MSG1 = 0x11,
    OT_BASE_MSG2 = 0x12,
    OT_PAYLOAD = 0x13,
    OT_DONE = 0x14,
    FPSI_HELLO = 0x20,
    FPSI_PARAMS = 0x21,
    FPSI_DONE = 0x22,
    SHARES_PUT = 0x30,
    SHARES_ACK = 0x31,
    RESULT_GET = 0x32,
    RESULT_DATA = 0x33,
    LENGTHS_DATA = 0x34,
    ERROR = 0x3F,
};

struct Frame {
    FrameType type;
    std::vector<std::uint8_t> payload;
};

class ProtocolError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// little-endian scalar packing used inside payloads
struct Writer {
    std::vector<std::uint8_t> buf;
    void u8(std::uint8_t v) { buf.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) buf.push_back((v >> (8 * i)) & 0xFF);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back((v >> (8 * i)) & 0xFF);
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back((v >> (8 * i)) & 0xFF);
    }
    void bytes(const std::uint8_t* p, std::size_t n) {
        buf.insert(buf.end(), p, p + n);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }
};

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw ProtocolError("truncated payload");
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::vector<std::uint8_t> bytes(std::size_t n) {
        need(n);
        std::vector<std::uint8_t> out(buf.begin() + pos, buf.begin() + pos + n);
        pos += n;
        return out;
    }
    std::string str() {
        std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
    bool done() const { return pos == buf.size(); }
};

}  // namespace xdup::net
