#include "xdup/system/system.hpp"

namespace xdup::system {

namespace {

constexpr std::uint8_t kOpSetup = 1;
constexpr std::uint8_t kOpQuery = 2;
constexpr std::uint8_t kOpProcess = 3;
constexpr std::uint8_t kOpRetrieve = 4;

void send_chunked(net::Channel& ch, const std::vector<std::uint8_t>& data) {
    std::size_t off = 0;
    do {
        std::size_t n = std::min(net::kShareChunkBytes, data.size() - off);
        ch.send_frame(net::FrameType::SHARES_PUT, {data.data() + off, n});
        off += n;
    } while (off < data.size());
}

std::vector<std::uint8_t> recv_chunked(net::Channel& ch, std::size_t total) {
    std::vector<std::uint8_t> data;
    data.reserve(total);
    do {
        net::Frame f = ch.expect(net::FrameType::SHARES_PUT);
        data.insert(data.end(), f.payload.begin(), f.payload.end());
    } while (data.size() < total);
    if (data.size() != total)
        throw net::ProtocolError("result download size mismatch");
    return data;
}

void hello(net::Channel& ch, std::uint8_t op, std::uint32_t team,
           std::uint64_t handle, std::uint64_t count, std::uint8_t mode,
           std::uint8_t variant, std::uint32_t l, std::uint32_t tau) {
    net::Writer w;
    w.str(kClientProto);
    w.u32(kSystemVersion);
    w.u8(op);
    w.u32(team);
    w.u64(handle);
    w.u64(count);
    w.u8(mode);
    w.u8(variant);
    w.u32(l);
    w.u32(tau);
    ch.send_frame(net::FrameType::HELLO, w.buf);
    ch.expect(net::FrameType::HELLO);
}

}  // namespace

TeamClient::TeamClient(std::uint32_t team, embedding::EmbeddingParams params,
                       std::uint64_t seed)
    : team_(team), params_(std::move(params)), rng_(seed) {
    params_.validate();
}

void TeamClient::upload(net::Channel& ch, std::uint8_t op,
                        std::uint64_t handle, std::uint8_t mode,
                        std::uint8_t variant,
                        const std::vector<BitString>& shares) {
    hello(ch, op, team_, handle, shares.size(), mode, variant, params_.l,
          params_.tau);
    std::vector<std::uint8_t> data;
    for (const BitString& s : shares)
        data.insert(data.end(), s.bytes().begin(), s.bytes().end());
    send_chunked(ch, data);
    ch.expect(net::FrameType::SHARES_ACK);
}

void TeamClient::setup(const std::vector<embedding::Record>& records,
                       net::Channel& node1, net::Channel& node2) {
    std::vector<BitString> s1, s2;
    s1.reserve(records.size());
    s2.reserve(records.size());
    for (const auto& r : records) {
        BitString e = embedding::embed(r, params_);
        BitString s = sample_bitstring(rng_, params_.l);
        s1.push_back(s);
        s2.push_back(bitstring_xor(s, e));
        own_.push_back(std::move(e));
    }
    upload(node1, kOpSetup, 0, 0, 0, s1);
    upload(node2, kOpSetup, 0, 0, 0, s2);
}

std::uint64_t TeamClient::query(const std::vector<embedding::Record>& q,
                                QueryMode mode, net::Channel& node1,
                                net::Channel& node2, SsVariant variant) {
    if (mode == QueryMode::online && q.size() != 1)
        throw SystemError("online queries carry a single record");
    if (q.empty() || q.size() > kMaxOfflineQuery)
        throw SystemError("query size out of range");
    if (variant == SsVariant::automatic)
        variant = q.size() > 1 ? SsVariant::batched : SsVariant::unbatched;
    if (variant == SsVariant::batched && q.size() < 2)
        throw SystemError("batched variant needs more than one query record");

    std::uint64_t handle = 0;
    while (handle == 0) handle = rng_.next_u64();
    std::vector<BitString> s1, s2;
    for (const auto& r : q) {
        BitString e = embedding::embed(r, params_);
        BitString s = sample_bitstring(rng_, params_.l);
        s1.push_back(s);
        s2.push_back(bitstring_xor(s, e));
    }
    std::uint8_t m = static_cast<std::uint8_t>(mode);
    std::uint8_t v = static_cast<std::uint8_t>(variant);
    upload(node1, kOpQuery, handle, m, v, s1);
    upload(node2, kOpQuery, handle, m, v, s2);
    return handle;
}

void TeamClient::trigger_process(std::uint64_t handle, net::Channel& node1) {
    hello(node1, kOpProcess, team_, handle, 0, 0, 0, params_.l, params_.tau);
    node1.expect(net::FrameType::SHARES_ACK);
}

QueryResult TeamClient::retrieve(std::uint64_t handle, net::Channel& node1,
                                 net::Channel& node2) {
    auto fetch = [&](net::Channel& ch) {
        hello(ch, kOpRetrieve, team_, handle, 0, 0, 0, params_.l, params_.tau);
        net::Frame head = ch.expect(net::FrameType::RESULT_DATA);
        net::Reader r{head.payload};
        std::uint64_t nq = r.u64();
        std::uint64_t nr = r.u64();
        std::uint32_t share_id = r.u8();
        auto bits = recv_chunked(ch, nq * nr);
        fpsi::SharedMatchMatrix share{share_id, fpsi::MatchMatrix(nq, nr)};
        for (std::uint64_t i = 0; i < nq; ++i)
            for (std::uint64_t j = 0; j < nr; ++j)
                share.share.set(i, j, bits[i * nr + j]);
        net::Frame lf = ch.expect(net::FrameType::LENGTHS_DATA);
        net::Reader lr{lf.payload};
        std::uint32_t n = lr.u32();
        LengthVector lengths(n);
        for (auto& e : lengths) {
            e.team = lr.u32();
            e.count = lr.u64();
        }
        return std::make_pair(std::move(share), std::move(lengths));
    };
    auto [sa, la] = fetch(node1);
    auto [sb, lb] = fetch(node2);
    if (la != lb) throw SystemError("nodes disagree on the length vector");
    QueryResult out;
    out.matches = fpsi::reconstruct_matches(sa, sb);
    out.lengths = std::move(la);
    out.duplicates = decode_duplicates(out.matches, out.lengths);
    return out;
}

std::vector<std::uint64_t> TeamClient::local_duplicates(
    const std::vector<embedding::Record>& q) const {
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < q.size(); ++i) {
        BitString e = embedding::embed(q[i], params_);
        for (const BitString& own : own_) {
            if (hamming_distance(e, own) <= params_.tau) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

}  // namespace xdup::system
