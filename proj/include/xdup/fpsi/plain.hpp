#pragma once

#include "xdup/core/rng.hpp"
#include "xdup/fpsi/fpsi.hpp"
#include "xdup/ot/session.hpp"

namespace xdup::fpsi {

// Plaintext-input protocol: the querier learns which (query, responder)
// pairs lie within Hamming distance tau; the responder learns nothing
// beyond the public parameters.
//
// Per query element: one batch of l distance OTs carrying nR packed
// residues each, then nR comparison OTs of arity p with 1-bit messages.
// Query elements are processed strictly in order.

struct QuerierResult {
    MatchMatrix matches;
    ot::OtTranscriptStats ot;
};

QuerierResult otfpsi_run_querier(net::Channel& ch, ot::RandomOtBackend& backend,
                                 const std::vector<BitString>& Q,
                                 const FpsiParams& params,
                                 DistanceOtMode mode = DistanceOtMode::correlated);

ot::OtTranscriptStats otfpsi_run_responder(
    net::Channel& ch, ot::RandomOtBackend& backend,
    const std::vector<BitString>& R, const FpsiParams& params, Rng& rng,
    DistanceOtMode mode = DistanceOtMode::correlated);

}  // namespace xdup::fpsi
