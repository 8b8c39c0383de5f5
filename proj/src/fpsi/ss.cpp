#include "xdup/core/bitpack.hpp"
#include "xdup/fpsi/ss.hpp"

namespace xdup::fpsi {

namespace {

void check_shares(const std::vector<BitString>& q_share,
                  const std::vector<BitString>& r_share,
                  const FpsiParams& params) {
    params.validate();
    check_elements(q_share, params.nq, params.l);
    check_elements(r_share, params.nr, params.l);
}

// comparison phase: S2 masks the threshold table with its output share
void compare_send(ot::OtSenderSession& snd, const FpsiParams& params,
                  const std::vector<std::uint32_t>& M_row, Rng& rng,
                  MatchMatrix& share, std::uint64_t i) {
    const std::uint32_t p = params.p();
    std::vector<std::vector<std::uint64_t>> tables(params.nr);
    for (std::uint64_t j = 0; j < params.nr; ++j) {
        bool p2 = rng.bit();
        share.set(i, j, p2);
        tables[j].resize(p);
        for (std::uint32_t m = 0; m < p; ++m)
            tables[j][m] = (((m + p - M_row[j]) % p) <= params.tau) ^ p2;
    }
    snd.np_chosen_ot({params.nr, p, 1}, tables);
}

void compare_recv(ot::OtReceiverSession& rcv, const FpsiParams& params,
                  const std::vector<std::uint32_t>& D_row, MatchMatrix& share,
                  std::uint64_t i) {
    auto bits = rcv.np_chosen_ot({params.nr, params.p(), 1}, D_row);
    for (std::uint64_t j = 0; j < params.nr; ++j)
        share.set(i, j, bits[j] & 1);
}

// the batched variant's masked residues ride OT_PAYLOAD/OT_DONE frames
void send_bits(net::Channel& ch, BitWriter& w) {
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

std::vector<std::uint8_t> recv_bits(net::Channel& ch, std::uint64_t n_bits) {
    std::size_t expected = (n_bits + 7) / 8;
    std::vector<std::uint8_t> data;
    data.reserve(expected);
    while (data.size() < expected) {
        net::Frame f = ch.expect(net::FrameType::OT_PAYLOAD);
        data.insert(data.end(), f.payload.begin(), f.payload.end());
    }
    if (data.size() != expected) throw FpsiError("masked stream size mismatch");
    ch.expect(net::FrameType::OT_DONE);
    return data;
}

// PRF input for comparison z = (i, j, k) and message index x
std::array<std::uint8_t, 21> ssb_encode(std::uint64_t i, std::uint64_t j,
                                        std::uint32_t k, std::uint8_t x) {
    std::array<std::uint8_t, 21> enc;
    for (int b = 0; b < 8; ++b) enc[b] = (i >> (8 * b)) & 0xFF;
    for (int b = 0; b < 8; ++b) enc[8 + b] = (j >> (8 * b)) & 0xFF;
    for (int b = 0; b < 4; ++b) enc[16 + b] = (k >> (8 * b)) & 0xFF;
    enc[20] = x;
    return enc;
}

void require_batchable(const FpsiParams& params) {
    if (params.nq == 1)
        throw BatchingInapplicable(
            "batched variant needs more than one query element");
}

}  // namespace

SsResult otfpsi_ss_run_s1(net::Channel& ch, ot::RandomOtBackend& backend,
                          const std::vector<BitString>& q_share,
                          const std::vector<BitString>& r_share,
                          const FpsiParams& params) {
    check_shares(q_share, r_share, params);
    handshake_initiate(ch, kProtoSs, params, DistanceOtMode::correlated);

    ot::OtTranscriptStats stats;
    ot::OtReceiverSession rcv(ch, backend, stats);
    const std::uint32_t p = params.p();
    const std::uint32_t rb = params.residue_bits();
    ot::OtBatchSpec dist_spec{params.l, 2, rb};

    MatchMatrix share(params.nq, params.nr);
    for (std::uint64_t i = 0; i < params.nq; ++i) {
        std::vector<std::uint32_t> D(params.nr, 0);
        for (std::uint64_t j = 0; j < params.nr; ++j) {
            std::vector<std::uint32_t> choices(params.l);
            for (std::uint32_t k = 0; k < params.l; ++k)
                choices[k] =
                    q_share[i].get(k + 1) ^ r_share[j].get(k + 1);
            auto d = rcv.correlated_ot(dist_spec, choices);
            for (std::uint32_t k = 0; k < params.l; ++k) {
                BitReader r{d[k]};
                D[j] = (D[j] + static_cast<std::uint32_t>(r.get(rb))) % p;
            }
        }
        compare_recv(rcv, params, D, share, i);
    }
    ch.expect(net::FrameType::FPSI_DONE);
    return {{1, std::move(share)}, std::move(stats)};
}

SsResult otfpsi_ss_run_s2(net::Channel& ch, ot::RandomOtBackend& backend,
                          const std::vector<BitString>& q_share,
                          const std::vector<BitString>& r_share,
                          const FpsiParams& params, Rng& rng) {
    check_shares(q_share, r_share, params);
    handshake_respond(ch, kProtoSs, params, DistanceOtMode::correlated);

    ot::OtTranscriptStats stats;
    ot::OtSenderSession snd(ch, backend, stats);
    const std::uint32_t p = params.p();
    const std::uint32_t rb = params.residue_bits();
    ot::OtBatchSpec dist_spec{params.l, 2, rb};

    MatchMatrix share(params.nq, params.nr);
    for (std::uint64_t i = 0; i < params.nq; ++i) {
        std::vector<std::uint32_t> M(params.nr, 0);
        for (std::uint64_t j = 0; j < params.nr; ++j) {
            std::vector<ot::CorrelationFn> fns(params.l);
            std::vector<std::uint32_t> b2(params.l);
            for (std::uint32_t k = 0; k < params.l; ++k) {
                b2[k] = q_share[i].get(k + 1) ^ r_share[j].get(k + 1);
                fns[k] = {p, rb, {b2[k] ? p - 1 : 1}};
            }
            auto m0s = snd.correlated_ot(dist_spec, fns);
            for (std::uint32_t k = 0; k < params.l; ++k) {
                BitReader r{m0s[k]};
                std::uint32_t m0 = static_cast<std::uint32_t>(r.get(rb));
                M[j] = (M[j] + m0 + p - b2[k]) % p;
            }
        }
        compare_send(snd, params, M, rng, share, i);
    }
    ch.send_frame(net::FrameType::FPSI_DONE, {});
    return {{2, std::move(share)}, std::move(stats)};
}

SsResult otfpsi_ssb_run_s1(net::Channel& ch, ot::RandomOtBackend& backend,
                           const std::vector<BitString>& q_share,
                           const std::vector<BitString>& r_share,
                           const FpsiParams& params, SsbTrace* trace) {
    check_shares(q_share, r_share, params);
    require_batchable(params);
    handshake_initiate(ch, kProtoSsb, params, DistanceOtMode::correlated);

    ot::OtTranscriptStats stats;
    ot::OtReceiverSession rcv(ch, backend, stats);
    const std::uint32_t p = params.p();
    const std::uint32_t rb = params.residue_bits();
    const std::uint64_t nq = params.nq, nr = params.nr;
    ot::OtBatchSpec seed_spec{nq + nr, 2,
                              static_cast<std::uint32_t>(kLambdaBits)};

    std::vector<std::uint32_t> D(nq * nr, 0);
    for (std::uint32_t k = 0; k < params.l; ++k) {
        std::vector<std::uint32_t> choices(nq + nr);
        for (std::uint64_t i = 0; i < nq; ++i)
            choices[i] = q_share[i].get(k + 1);
        for (std::uint64_t j = 0; j < nr; ++j)
            choices[nq + j] = r_share[j].get(k + 1);
        auto seeds = rcv.random_ot(seed_spec, choices);
        std::vector<Prf> fx, fy;
        fx.reserve(nq);
        fy.reserve(nr);
        for (std::uint64_t i = 0; i < nq; ++i)
            fx.emplace_back(PrfKey::from_bytes(seeds[i]));
        for (std::uint64_t j = 0; j < nr; ++j)
            fy.emplace_back(PrfKey::from_bytes(seeds[nq + j]));

        auto data = recv_bits(ch, nq * nr * 3 * std::uint64_t{rb});
        stats.payload_bits_sent += nq * nr * 3 * std::uint64_t{rb};
        BitReader r{data};
        for (std::uint64_t i = 0; i < nq; ++i) {
            for (std::uint64_t j = 0; j < nr; ++j) {
                std::uint32_t mu[4] = {0, 0, 0, 0};
                for (int x = 1; x <= 3; ++x)
                    mu[x] = static_cast<std::uint32_t>(r.get(rb));
                std::uint32_t c = 2 * choices[i] + choices[nq + j];
                auto enc = ssb_encode(i, j, k, static_cast<std::uint8_t>(c));
                std::uint32_t f =
                    (fx[i].eval_mod(enc, p) + fy[j].eval_mod(enc, p)) % p;
                std::uint32_t d = (f + mu[c]) % p;
                if (trace) trace->residues.push_back(d);
                D[i * nr + j] = (D[i * nr + j] + d) % p;
            }
        }
    }
    MatchMatrix share(nq, nr);
    for (std::uint64_t i = 0; i < nq; ++i) {
        std::vector<std::uint32_t> row(D.begin() + i * nr,
                                       D.begin() + (i + 1) * nr);
        compare_recv(rcv, params, row, share, i);
    }
    ch.expect(net::FrameType::FPSI_DONE);
    return {{1, std::move(share)}, std::move(stats)};
}

SsResult otfpsi_ssb_run_s2(net::Channel& ch, ot::RandomOtBackend& backend,
                           const std::vector<BitString>& q_share,
                           const std::vector<BitString>& r_share,
                           const FpsiParams& params, Rng& rng,
                           SsbTrace* trace) {
    check_shares(q_share, r_share, params);
    require_batchable(params);
    handshake_respond(ch, kProtoSsb, params, DistanceOtMode::correlated);

    ot::OtTranscriptStats stats;
    ot::OtSenderSession snd(ch, backend, stats);
    const std::uint32_t p = params.p();
    const std::uint32_t rb = params.residue_bits();
    const std::uint64_t nq = params.nq, nr = params.nr;
    ot::OtBatchSpec seed_spec{nq + nr, 2,
                              static_cast<std::uint32_t>(kLambdaBits)};

    std::vector<std::uint32_t> M(nq * nr, 0);
    for (std::uint32_t k = 0; k < params.l; ++k) {
        auto seeds = snd.random_ot(seed_spec);
        std::vector<Prf> fx[2], fy[2];
        for (int b = 0; b < 2; ++b) {
            fx[b].reserve(nq);
            fy[b].reserve(nr);
            for (std::uint64_t i = 0; i < nq; ++i)
                fx[b].emplace_back(PrfKey::from_bytes(seeds[i][b]));
            for (std::uint64_t j = 0; j < nr; ++j)
                fy[b].emplace_back(PrfKey::from_bytes(seeds[nq + j][b]));
        }
        BitWriter w;
        for (std::uint64_t i = 0; i < nq; ++i) {
            for (std::uint64_t j = 0; j < nr; ++j) {
                std::uint32_t b2 =
                    q_share[i].get(k + 1) ^ r_share[j].get(k + 1);
                std::uint32_t omega[4];
                for (std::uint32_t x = 0; x < 4; ++x) {
                    auto enc =
                        ssb_encode(i, j, k, static_cast<std::uint8_t>(x));
                    omega[x] = (fx[(x >> 1) & 1][i].eval_mod(enc, p) +
                                fy[x & 1][j].eval_mod(enc, p)) %
                               p;
                }
                std::uint32_t m = (omega[0] + p - b2) % p;
                std::uint32_t m_near = omega[0];             // choices 0 and 3
                std::uint32_t m_far = (m + (1u ^ b2)) % p;   // choices 1 and 2
                std::uint32_t msg[4] = {m_near, m_far, m_far, m_near};
                for (std::uint32_t x = 1; x < 4; ++x)
                    w.put((msg[x] + p - omega[x]) % p, rb);
                if (trace) trace->residues.push_back(m);
                M[i * nr + j] = (M[i * nr + j] + m) % p;
            }
        }
        stats.payload_bits_sent += nq * nr * 3 * std::uint64_t{rb};
        send_bits(ch, w);
    }
    MatchMatrix share(nq, nr);
    for (std::uint64_t i = 0; i < nq; ++i) {
        std::vector<std::uint32_t> row(M.begin() + i * nr,
                                       M.begin() + (i + 1) * nr);
        compare_send(snd, params, row, rng, share, i);
    }
    ch.send_frame(net::FrameType::FPSI_DONE, {});
    return {{2, std::move(share)}, std::move(stats)};
}

}  // namespace xdup::fpsi
