#include <cstring>
#include <filesystem>
#include <fstream>

#include "xdup/ot/backend.hpp"
#include "xdup/system/system.hpp"

namespace xdup::system {

namespace {

constexpr std::uint8_t kOpSetup = 1;
constexpr std::uint8_t kOpQuery = 2;
constexpr std::uint8_t kOpProcess = 3;
constexpr std::uint8_t kOpRetrieve = 4;

std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

std::size_t share_bytes(std::uint32_t l) { return (l + 7) / 8; }

[[noreturn]] void fail(net::Channel& ch, std::uint32_t code,
                       const std::string& msg) {
    ch.send_error(code, msg);
    throw SystemError(msg);
}

void send_chunked(net::Channel& ch, const std::vector<std::uint8_t>& data) {
    std::size_t off = 0;
    do {
        std::size_t n = std::min(net::kShareChunkBytes, data.size() - off);
        ch.send_frame(net::FrameType::SHARES_PUT,
                      {data.data() + off, n});
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
        throw net::ProtocolError("share upload size mismatch");
    return data;
}

std::vector<BitString> unpack_shares(const std::vector<std::uint8_t>& data,
                                     std::uint64_t count, std::uint32_t l) {
    std::size_t sb = share_bytes(l);
    std::vector<BitString> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i)
        out.push_back(BitString::from_bytes(
            l, {data.begin() + i * sb, data.begin() + (i + 1) * sb}));
    return out;
}

void write_lengths(net::Writer& w, const LengthVector& lengths) {
    w.u32(static_cast<std::uint32_t>(lengths.size()));
    for (const auto& e : lengths) {
        w.u32(e.team);
        w.u64(e.count);
    }
}

LengthVector read_lengths(net::Reader& r) {
    std::uint32_t n = r.u32();
    LengthVector out(n);
    for (auto& e : out) {
        e.team = r.u32();
        e.count = r.u64();
    }
    return out;
}

}  // namespace

std::vector<Duplicate> decode_duplicates(const fpsi::MatchMatrix& matches,
                                         const LengthVector& lengths) {
    std::uint64_t total = 0;
    for (const auto& e : lengths) total += e.count;
    if (total != matches.nr())
        throw SystemError("length vector does not cover the result columns");
    std::vector<Duplicate> out;
    for (const auto& [i, j0] : matches.index_set()) {
        std::uint64_t j = j0 + 1;  // 1-based column
        std::uint64_t cum = 0;
        for (const auto& e : lengths) {
            if (j <= cum + e.count) {
                out.push_back({i, e.team, j - cum - 1});
                break;
            }
            cum += e.count;
        }
    }
    return out;
}

NodeService::NodeService(NodeConfig config, std::uint64_t rng_seed)
    : config_(std::move(config)), rng_(rng_seed) {
    if (config_.share_id != 1 && config_.share_id != 2)
        throw SystemError("share id must be 1 or 2");
    if (!config_.store_dir.empty()) {
        std::filesystem::create_directories(config_.store_dir);
        replay_log();
    }
}

void NodeService::replay_log() {
    std::ifstream in(config_.store_dir + "/shares.log", std::ios::binary);
    if (!in) return;
    std::size_t sb = share_bytes(config_.l);
    std::vector<char> rec(8 + sb);
    while (in.read(rec.data(), rec.size())) {
        std::uint32_t team = 0, index = 0;
        std::memcpy(&team, rec.data(), 4);
        std::memcpy(&index, rec.data() + 4, 4);
        auto& d = db_[team];
        if (index != d.size())
            throw SystemError("share log out of order for team " +
                              std::to_string(team));
        std::vector<std::uint8_t> bytes(rec.begin() + 8, rec.end());
        d.push_back(BitString::from_bytes(config_.l, std::move(bytes)));
    }
    if (in.gcount() != 0) throw SystemError("truncated share log record");
}

void NodeService::log_append(std::uint32_t team, std::uint32_t index,
                             const BitString& share) {
    if (config_.store_dir.empty()) return;
    std::ofstream out(config_.store_dir + "/shares.log",
                      std::ios::binary | std::ios::app);
    if (!out) throw SystemError("cannot append to share log");
    char head[8];
    std::memcpy(head, &team, 4);
    std::memcpy(head + 4, &index, 4);
    out.write(head, 8);
    out.write(reinterpret_cast<const char*>(share.bytes().data()),
              static_cast<std::streamsize>(share.bytes().size()));
    if (!out) throw SystemError("share log write failed");
}

void NodeService::append_team(std::uint32_t team,
                              const std::vector<BitString>& shares) {
    auto& d = db_[team];
    for (const BitString& s : shares) {
        log_append(team, static_cast<std::uint32_t>(d.size()), s);
        d.push_back(s);
    }
}

std::pair<std::vector<BitString>, LengthVector> NodeService::other_teams(
    std::uint32_t team) const {
    std::vector<BitString> concat;
    LengthVector lengths;
    for (const auto& [t, shares] : db_) {
        if (t == team) {
            lengths.push_back({t, 0});
            continue;
        }
        lengths.push_back({t, shares.size()});
        concat.insert(concat.end(), shares.begin(), shares.end());
    }
    return {std::move(concat), std::move(lengths)};
}

std::vector<std::uint32_t> NodeService::teams() const {
    std::lock_guard lock(mu_);
    std::vector<std::uint32_t> out;
    for (const auto& [t, _] : db_) out.push_back(t);
    return out;
}

std::uint64_t NodeService::team_size(std::uint32_t team) const {
    std::lock_guard lock(mu_);
    auto it = db_.find(team);
    if (it == db_.end()) throw SystemError("unknown team");
    return it->second.size();
}

std::vector<BitString> NodeService::team_shares(std::uint32_t team) const {
    std::lock_guard lock(mu_);
    auto it = db_.find(team);
    if (it == db_.end()) throw SystemError("unknown team");
    return it->second;
}

bool NodeService::has_result(std::uint64_t handle) const {
    std::lock_guard lock(mu_);
    return results_.count(handle) != 0;
}

bool NodeService::has_pending(std::uint64_t handle) const {
    std::lock_guard lock(mu_);
    auto it = pending_.find(handle);
    return it != pending_.end() && !it->second.failed;
}

void NodeService::purge_expired() {
    auto now = std::chrono::steady_clock::now();
    for (auto it = results_.begin(); it != results_.end();) {
        auto age = std::chrono::duration_cast<std::chrono::milliseconds>(
                       now - it->second.stored_at)
                       .count();
        if (age > static_cast<long long>(config_.result_ttl_ms))
            it = results_.erase(it);
        else
            ++it;
    }
}

std::vector<BitString> NodeService::recv_shares(net::Channel& ch,
                                                std::uint64_t count) {
    auto data = recv_chunked(ch, count * share_bytes(config_.l));
    return unpack_shares(data, count, config_.l);
}

void NodeService::serve_client(net::Channel& ch) {
    net::Frame hello = ch.expect(net::FrameType::HELLO);
    net::Reader r{hello.payload};
    if (r.str() != kClientProto) fail(ch, 10, "unknown client protocol");
    if (r.u32() != kSystemVersion) fail(ch, 11, "client version mismatch");
    std::uint8_t op = r.u8();
    std::uint32_t team = r.u32();
    std::uint64_t handle = r.u64();
    std::uint64_t count = r.u64();
    std::uint8_t mode = r.u8();
    std::uint8_t variant = r.u8();
    std::uint32_t l = r.u32();
    std::uint32_t tau = r.u32();
    if ((op == kOpSetup || op == kOpQuery) &&
        (l != config_.l || tau != config_.tau))
        fail(ch, 12, "embedding parameters do not match this node");

    net::Writer ack;
    ack.str(kClientProto);
    ack.u32(kSystemVersion);
    ack.u8(op);
    ch.send_frame(net::FrameType::HELLO, ack.buf);

    switch (op) {
        case kOpSetup:
            handle_setup(ch, team, count);
            break;
        case kOpQuery:
            handle_query(ch, team, handle, count, mode, variant);
            break;
        case kOpProcess: {
            if (!peer_dialer_)
                fail(ch, 20, "node has no peer endpoint configured");
            auto peer = peer_dialer_();
            try {
                process(handle, *peer);
            } catch (const std::exception& e) {
                fail(ch, 21, std::string("processing failed: ") + e.what());
            }
            net::Writer w;
            w.u64(handle);
            ch.send_frame(net::FrameType::SHARES_ACK, w.buf);
            break;
        }
        case kOpRetrieve:
            handle_retrieve(ch, handle);
            break;
        default:
            fail(ch, 13, "unknown operation");
    }
}

void NodeService::handle_setup(net::Channel& ch, std::uint32_t team,
                               std::uint64_t count) {
    {
        std::lock_guard lock(mu_);
        if (db_.count(team)) fail(ch, 14, "duplicate team id");
    }
    std::vector<BitString> shares = recv_shares(ch, count);
    std::uint64_t total;
    {
        std::lock_guard lock(mu_);
        db_[team];  // register even when empty
        append_team(team, shares);
        total = db_[team].size();
    }
    net::Writer w;
    w.u64(total);
    ch.send_frame(net::FrameType::SHARES_ACK, w.buf);
}

void NodeService::handle_query(net::Channel& ch, std::uint32_t team,
                               std::uint64_t handle, std::uint64_t count,
                               std::uint8_t mode, std::uint8_t variant) {
    {
        std::lock_guard lock(mu_);
        if (!db_.count(team)) fail(ch, 15, "unknown team");
        if (pending_.count(handle) || results_.count(handle))
            fail(ch, 16, "query handle already in use");
    }
    if (mode == static_cast<std::uint8_t>(QueryMode::online)) {
        if (count != 1) fail(ch, 17, "online queries carry a single record");
    } else if (mode == static_cast<std::uint8_t>(QueryMode::offline)) {
        if (count < 1 || count > kMaxOfflineQuery)
            fail(ch, 17, "offline query size out of range");
    } else {
        fail(ch, 17, "unknown query mode");
    }
    if (variant != static_cast<std::uint8_t>(SsVariant::unbatched) &&
        variant != static_cast<std::uint8_t>(SsVariant::batched))
        fail(ch, 18, "query variant must be resolved by the client");
    if (variant == static_cast<std::uint8_t>(SsVariant::batched) && count < 2)
        fail(ch, 18, "batched variant needs more than one query record");

    std::vector<BitString> shares = recv_shares(ch, count);
    {
        std::lock_guard lock(mu_);
        pending_[handle] = {team, variant, std::move(shares), false};
    }
    net::Writer w;
    w.u64(count);
    ch.send_frame(net::FrameType::SHARES_ACK, w.buf);
}

void NodeService::handle_retrieve(net::Channel& ch, std::uint64_t handle) {
    fpsi::SharedMatchMatrix share;
    LengthVector lengths;
    {
        std::lock_guard lock(mu_);
        purge_expired();
        auto it = results_.find(handle);
        if (it == results_.end()) {
            auto p = pending_.find(handle);
            if (p != pending_.end() && p->second.failed)
                fail(ch, 19, "query failed");
            fail(ch, 19, "no result for this handle");
        }
        share = it->second.share;
        lengths = it->second.lengths;
    }
    net::Writer head;
    head.u64(share.share.nq());
    head.u64(share.share.nr());
    head.u8(static_cast<std::uint8_t>(share.share_id));
    ch.send_frame(net::FrameType::RESULT_DATA, head.buf);
    std::vector<std::uint8_t> bits(share.share.nq() * share.share.nr());
    for (std::uint64_t i = 0; i < share.share.nq(); ++i)
        for (std::uint64_t j = 0; j < share.share.nr(); ++j)
            bits[i * share.share.nr() + j] = share.share.get(i, j);
    send_chunked(ch, bits);
    net::Writer lw;
    write_lengths(lw, lengths);
    ch.send_frame(net::FrameType::LENGTHS_DATA, lw.buf);
}

void NodeService::process(std::uint64_t handle, net::Channel& peer) {
    std::lock_guard serialize(process_mu_);
    PendingQuery query;
    std::vector<BitString> responders;
    LengthVector lengths;
    {
        std::lock_guard lock(mu_);
        auto it = pending_.find(handle);
        if (it == pending_.end() || it->second.failed)
            throw SystemError("no pending query for this handle");
        query = it->second;
        std::tie(responders, lengths) = other_teams(query.team);
    }
    fpsi::FpsiParams params{config_.l, config_.tau, query.shares.size(),
                            responders.size()};

    auto mark_failed = [&] {
        std::lock_guard lock(mu_);
        pending_[handle].failed = true;
    };
    try {
        net::Writer hello;
        hello.str(kPeerProto);
        hello.u32(kSystemVersion);
        peer.send_frame(net::FrameType::HELLO, hello.buf);
        peer.expect(net::FrameType::HELLO);

        net::Writer pw;
        pw.u64(handle);
        pw.u32(query.team);
        pw.u8(query.variant);
        pw.u32(params.l);
        pw.u32(params.tau);
        pw.u64(params.nq);
        pw.u64(params.nr);
        write_lengths(pw, lengths);
        peer.send_frame(net::FrameType::PARAMS, pw.buf);
        net::Frame echo = peer.expect(net::FrameType::PARAMS);
        if (echo.payload != pw.buf)
            throw SystemError("peer node state disagrees on this query");

        fpsi::SharedMatchMatrix result;
        if (params.nr == 0) {
            result = {config_.share_id,
                      fpsi::MatchMatrix(params.nq, 0)};
        } else {
            Rng run_rng(rng_.next_u64());
            std::unique_ptr<ot::RandomOtBackend> backend;
            if (config_.use_group_ot) {
                backend = std::make_unique<ot::GroupBackend>(
                    ot::OtRole::receiver, peer, run_rng);
            } else {
                backend = std::make_unique<ot::DealerBackend>(
                    ot::OtRole::receiver, peer,
                    std::make_shared<ot::DealerLedger>(config_.ot_seed ^
                                                       mix(handle)));
            }
            auto res =
                query.variant == static_cast<std::uint8_t>(SsVariant::batched)
                    ? fpsi::otfpsi_ssb_run_s1(peer, *backend, query.shares,
                                              responders, params)
                    : fpsi::otfpsi_ss_run_s1(peer, *backend, query.shares,
                                             responders, params);
            result = std::move(res.share);
        }

        // two-phase commit so both nodes append in lockstep
        net::Writer ack;
        ack.u64(handle);
        peer.send_frame(net::FrameType::SHARES_ACK, ack.buf);
        net::Frame confirm = peer.expect(net::FrameType::SHARES_ACK);
        if (confirm.payload != ack.buf)
            throw SystemError("append confirmation mismatch");

        std::lock_guard lock(mu_);
        append_team(query.team, query.shares);
        results_[handle] = {std::move(result), std::move(lengths),
                            std::chrono::steady_clock::now()};
        pending_.erase(handle);
    } catch (...) {
        mark_failed();
        throw;
    }
}

void NodeService::serve_peer(net::Channel& ch) {
    std::lock_guard serialize(process_mu_);
    net::Frame hello = ch.expect(net::FrameType::HELLO);
    {
        net::Reader r{hello.payload};
        if (r.str() != kPeerProto) fail(ch, 30, "unknown peer protocol");
        if (r.u32() != kSystemVersion) fail(ch, 31, "peer version mismatch");
    }
    net::Writer hw;
    hw.str(kPeerProto);
    hw.u32(kSystemVersion);
    ch.send_frame(net::FrameType::HELLO, hw.buf);

    net::Frame pf = ch.expect(net::FrameType::PARAMS);
    net::Reader r{pf.payload};
    std::uint64_t handle = r.u64();
    std::uint32_t team = r.u32();
    std::uint8_t variant = r.u8();
    fpsi::FpsiParams params{r.u32(), r.u32(), r.u64(), r.u64()};
    LengthVector peer_lengths = read_lengths(r);

    PendingQuery query;
    std::vector<BitString> responders;
    LengthVector lengths;
    {
        std::lock_guard lock(mu_);
        auto it = pending_.find(handle);
        if (it == pending_.end() || it->second.failed)
            fail(ch, 32, "no pending query for this handle");
        query = it->second;
        std::tie(responders, lengths) = other_teams(query.team);
    }
    auto mark_failed = [&] {
        std::lock_guard lock(mu_);
        pending_[handle].failed = true;
    };
    try {
        if (team != query.team || variant != query.variant ||
            params.l != config_.l || params.tau != config_.tau ||
            params.nq != query.shares.size() || lengths != peer_lengths ||
            params.nr != responders.size())
            fail(ch, 33, "node state disagrees on this query");
        ch.send_frame(net::FrameType::PARAMS, pf.payload);

        fpsi::SharedMatchMatrix result;
        if (params.nr == 0) {
            result = {config_.share_id, fpsi::MatchMatrix(params.nq, 0)};
        } else {
            Rng run_rng(rng_.next_u64());
            std::unique_ptr<ot::RandomOtBackend> backend;
            if (config_.use_group_ot) {
                backend = std::make_unique<ot::GroupBackend>(
                    ot::OtRole::sender, ch, run_rng);
            } else {
                backend = std::make_unique<ot::DealerBackend>(
                    ot::OtRole::sender, ch,
                    std::make_shared<ot::DealerLedger>(config_.ot_seed ^
                                                       mix(handle)));
            }
            auto res =
                query.variant == static_cast<std::uint8_t>(SsVariant::batched)
                    ? fpsi::otfpsi_ssb_run_s2(ch, *backend, query.shares,
                                              responders, params, run_rng)
                    : fpsi::otfpsi_ss_run_s2(ch, *backend, query.shares,
                                             responders, params, run_rng);
            result = std::move(res.share);
        }

        net::Frame ack = ch.expect(net::FrameType::SHARES_ACK);
        {
            net::Reader ar{ack.payload};
            if (ar.u64() != handle) fail(ch, 34, "append handle mismatch");
        }
        ch.send_frame(net::FrameType::SHARES_ACK, ack.payload);

        std::lock_guard lock(mu_);
        append_team(query.team, query.shares);
        results_[handle] = {std::move(result), std::move(lengths),
                            std::chrono::steady_clock::now()};
        pending_.erase(handle);
    } catch (...) {
        mark_failed();
        throw;
    }
}

}  // namespace xdup::system
