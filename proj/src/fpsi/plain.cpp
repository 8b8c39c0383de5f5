#include "xdup/core/bitpack.hpp"
#include "xdup/fpsi/plain.hpp"

namespace xdup::fpsi {

QuerierResult otfpsi_run_querier(net::Channel& ch, ot::RandomOtBackend& backend,
                                 const std::vector<BitString>& Q,
                                 const FpsiParams& params,
                                 DistanceOtMode mode) {
    params.validate();
    check_elements(Q, params.nq, params.l);
    handshake_initiate(ch, kProtoPlain, params, mode);

    ot::OtTranscriptStats stats;
    ot::OtReceiverSession rcv(ch, backend, stats);
    const std::uint32_t p = params.p();
    const std::uint32_t rb = params.residue_bits();
    const std::uint64_t nr = params.nr;
    ot::OtBatchSpec dist_spec{params.l, 2,
                              static_cast<std::uint32_t>(nr * rb)};
    ot::OtBatchSpec cmp_spec{nr, p, 1};

    MatchMatrix matches(params.nq, nr);
    for (std::uint64_t i = 0; i < params.nq; ++i) {
        std::vector<std::uint32_t> choices(params.l);
        for (std::uint32_t j = 0; j < params.l; ++j)
            choices[j] = Q[i].get(j + 1);
        auto rows = mode == DistanceOtMode::correlated
                        ? rcv.correlated_ot(dist_spec, choices)
                        : rcv.chosen_ot(dist_spec, choices);
        std::vector<std::uint32_t> D(nr, 0);
        for (std::uint32_t j = 0; j < params.l; ++j) {
            BitReader r{rows[j]};
            for (std::uint64_t k = 0; k < nr; ++k)
                D[k] = (D[k] + static_cast<std::uint32_t>(r.get(rb))) % p;
        }
        auto bits = rcv.np_chosen_ot(cmp_spec, D);
        for (std::uint64_t k = 0; k < nr; ++k)
            matches.set(i, k, bits[k] & 1);
    }
    ch.expect(net::FrameType::FPSI_DONE);
    return {std::move(matches), std::move(stats)};
}

ot::OtTranscriptStats otfpsi_run_responder(net::Channel& ch,
                                           ot::RandomOtBackend& backend,
                                           const std::vector<BitString>& R,
                                           const FpsiParams& params, Rng& rng,
                                           DistanceOtMode mode) {
    params.validate();
    check_elements(R, params.nr, params.l);
    handshake_respond(ch, kProtoPlain, params, mode);

    ot::OtTranscriptStats stats;
    ot::OtSenderSession snd(ch, backend, stats);
    const std::uint32_t p = params.p();
    const std::uint32_t rb = params.residue_bits();
    const std::uint64_t nr = params.nr;
    ot::OtBatchSpec dist_spec{params.l, 2,
                              static_cast<std::uint32_t>(nr * rb)};
    ot::OtBatchSpec cmp_spec{nr, p, 1};

    // bit column j of R, shared by every query element
    auto column = [&](std::uint32_t j, std::uint64_t k) -> std::uint32_t {
        return R[k].get(j + 1);
    };
    std::vector<ot::CorrelationFn> fns;
    if (mode == DistanceOtMode::correlated) {
        fns.resize(params.l);
        for (std::uint32_t j = 0; j < params.l; ++j) {
            fns[j].modulus = p;
            fns[j].field_bits = rb;
            fns[j].add_const.resize(nr);
            // m1 - m0 = (1 xor r) - r mod p
            for (std::uint64_t k = 0; k < nr; ++k)
                fns[j].add_const[k] = column(j, k) ? p - 1 : 1;
        }
    }

    for (std::uint64_t i = 0; i < params.nq; ++i) {
        std::vector<std::uint32_t> M(nr, 0);
        if (mode == DistanceOtMode::correlated) {
            auto m0s = snd.correlated_ot(dist_spec, fns);
            for (std::uint32_t j = 0; j < params.l; ++j) {
                BitReader r{m0s[j]};
                // the mask itself is m = m0 - r
                for (std::uint64_t k = 0; k < nr; ++k) {
                    std::uint32_t m0 = static_cast<std::uint32_t>(r.get(rb));
                    M[k] = (M[k] + m0 + p - column(j, k)) % p;
                }
            }
        } else {
            std::vector<std::vector<ot::Payload>> msgs(params.l);
            for (std::uint32_t j = 0; j < params.l; ++j) {
                BitWriter w0, w1;
                for (std::uint64_t k = 0; k < nr; ++k) {
                    std::uint32_t m =
                        static_cast<std::uint32_t>(rng.uniform(p));
                    std::uint32_t r = column(j, k);
                    w0.put((m + r) % p, rb);
                    w1.put((m + (1u ^ r)) % p, rb);
                    M[k] = (M[k] + m) % p;
                }
                msgs[j] = {w0.take(), w1.take()};
            }
            snd.chosen_ot(dist_spec, msgs);
        }
        std::vector<std::vector<std::uint64_t>> tables(nr);
        for (std::uint64_t k = 0; k < nr; ++k) {
            tables[k].resize(p);
            for (std::uint32_t m = 0; m < p; ++m)
                tables[k][m] = ((m + p - M[k]) % p) <= params.tau;
        }
        snd.np_chosen_ot(cmp_spec, tables);
    }
    ch.send_frame(net::FrameType::FPSI_DONE, {});
    return stats;
}

}  // namespace xdup::fpsi
