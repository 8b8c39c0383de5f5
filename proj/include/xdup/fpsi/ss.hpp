#pragma once

#include "xdup/core/rng.hpp"
#include "xdup/fpsi/fpsi.hpp"
#include "xdup/ot/session.hpp"

namespace xdup::fpsi {

// Secret-shared protocols between compute nodes S1 and S2. Each node holds
// XOR shares of both sets; the output is an XOR-shared match matrix. S1 is
// always the OT receiver and S2 the sender.

struct SsResult {
    SharedMatchMatrix share;
    ot::OtTranscriptStats ot;
};

// Test-only instrumentation: per-comparison residues in (k, i, j) order.
// S1 fills d_z, S2 fills m_z; d_z - m_z mod p recovers the XOR of the
// underlying plaintext bits.
struct SsbTrace {
    std::vector<std::uint32_t> residues;
};

// Unbatched variant: one distance OT per (query, responder, bit) triple,
// nQ*nR*l in total, plus nQ*nR comparison OTs.
SsResult otfpsi_ss_run_s1(net::Channel& ch, ot::RandomOtBackend& backend,
                          const std::vector<BitString>& q_share,
                          const std::vector<BitString>& r_share,
                          const FpsiParams& params);
SsResult otfpsi_ss_run_s2(net::Channel& ch, ot::RandomOtBackend& backend,
                          const std::vector<BitString>& q_share,
                          const std::vector<BitString>& r_share,
                          const FpsiParams& params, Rng& rng);

// Batched variant: (nQ+nR)*l seed OTs plus nQ*nR comparison OTs; the
// per-comparison masks are derived from PRF seeds and only three packed
// residues per comparison cross the wire. Throws BatchingInapplicable for
// nQ = 1.
SsResult otfpsi_ssb_run_s1(net::Channel& ch, ot::RandomOtBackend& backend,
                           const std::vector<BitString>& q_share,
                           const std::vector<BitString>& r_share,
                           const FpsiParams& params, SsbTrace* trace = nullptr);
SsResult otfpsi_ssb_run_s2(net::Channel& ch, ot::RandomOtBackend& backend,
                           const std::vector<BitString>& q_share,
                           const std::vector<BitString>& r_share,
                           const FpsiParams& params, Rng& rng,
                           SsbTrace* trace = nullptr);

}  // namespace xdup::fpsi
