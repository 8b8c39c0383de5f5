#pragma once

#include "xdup/net/channel.hpp"
#include "xdup/ot/ot.hpp"

namespace xdup::ot {

// Derived OT constructions on top of a random-OT backend. Both roles must
// issue the same sequence of calls with identical batch specs; the masked
// messages travel as OT_PAYLOAD frames followed by OT_DONE.
//
// Payloads longer than lambda bits are handled transparently: the backend
// round runs at lambda bits and each message is the PRF expansion of its
// seed, so the backend never sees long messages.
//
// Stats: each call adds `count` to the arity bucket and the masked-message
// bits to payload_bits_sent. Base OTs internal to the 1-of-N construction
// are not counted.
class OtSenderSession {
  public:
    OtSenderSession(net::Channel& channel, RandomOtBackend& backend,
                    OtTranscriptStats& stats);

    // protocol-sampled random messages, [count][arity]
    std::vector<std::vector<Payload>> random_ot(const OtBatchSpec& spec,
                                                bool record = true);

    // sender-chosen messages; mu_x = m_x xor omega_x for every x
    void chosen_ot(const OtBatchSpec& spec,
                   const std::vector<std::vector<Payload>>& messages);

    // arity-2 correlated OT: m_0 = omega_0, m_1 = f(m_0); only
    // mu = f(m_0) xor omega_1 is sent. Returns m_0 per instance.
    std::vector<Payload> correlated_ot(const OtBatchSpec& spec,
                                       std::span<const CorrelationFn> fns);

    // 1-of-N via ceil(log2 N) base 1-of-2 random OTs on lambda-bit keys
    // plus N short ciphertexts per instance; message_bits <= 64
    void np_chosen_ot(const OtBatchSpec& spec,
                      const std::vector<std::vector<std::uint64_t>>& messages);

  private:
    net::Channel& ch_;
    RandomOtBackend& backend_;
    OtTranscriptStats& stats_;
    std::uint64_t np_instance_ = 0;
};

class OtReceiverSession {
  public:
    OtReceiverSession(net::Channel& channel, RandomOtBackend& backend,
                      OtTranscriptStats& stats);

    std::vector<Payload> random_ot(const OtBatchSpec& spec,
                                   std::span<const std::uint32_t> choices,
                                   bool record = true);

    std::vector<Payload> chosen_ot(const OtBatchSpec& spec,
                                   std::span<const std::uint32_t> choices);

    std::vector<Payload> correlated_ot(const OtBatchSpec& spec,
                                       std::span<const std::uint32_t> choices);

    std::vector<std::uint64_t> np_chosen_ot(
        const OtBatchSpec& spec, std::span<const std::uint32_t> choices);

  private:
    net::Channel& ch_;
    RandomOtBackend& backend_;
    OtTranscriptStats& stats_;
    std::uint64_t np_instance_ = 0;
};

}  // namespace xdup::ot
