#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "xdup/core/prf.hpp"

namespace xdup::ot {

enum class OtRole { sender, receiver };

class OtError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A batch of `count` parallel 1-out-of-`arity` OTs with `message_bits`-bit
// payloads.
struct OtBatchSpec {
    std::uint64_t count = 1;
    std::uint32_t arity = 2;
    std::uint32_t message_bits = 1;

    void validate() const {
        if (count < 1 || arity < 2 || message_bits < 1)
            throw OtError("invalid OT batch spec");
    }
    std::size_t message_bytes() const { return (message_bits + 7) / 8; }
    bool operator==(const OtBatchSpec&) const = default;
};

// packed message_bits-bit payload; bits beyond message_bits are zero
using Payload = std::vector<std::uint8_t>;

// Correlation f(m0) = m0 + add_const (element-wise mod p over packed
// field_bits-wide fields). The only correlation shape the protocols need.
struct CorrelationFn {
    std::uint32_t modulus = 2;
    std::uint32_t field_bits = 1;
    std::vector<std::uint32_t> add_const;  // one entry per field

    Payload apply(const Payload& m0) const;
};

struct OtTranscriptStats {
    std::map<std::uint32_t, std::uint64_t> ot_count_by_arity;
    std::uint64_t payload_bits_sent = 0;  // masked-message bits, pre-framing

    std::uint64_t ot_count(std::uint32_t arity) const {
        auto it = ot_count_by_arity.find(arity);
        return it == ot_count_by_arity.end() ? 0 : it->second;
    }
    std::uint64_t total_ots() const {
        std::uint64_t n = 0;
        for (auto& [a, c] : ot_count_by_arity) n += c;
        return n;
    }
};

// Backend realizing the random-OT functionality. `record_stats` is false
// when a batch is internal to a derived construction (Naor-Pinkas base OTs)
// so only the outer OT is counted.
class RandomOtBackend {
  public:
    virtual ~RandomOtBackend() = default;

    // sender side: protocol-sampled messages, [count][arity]
    virtual std::vector<std::vector<Payload>> run_send(const OtBatchSpec& spec) = 0;
    // receiver side: the chosen message per instance
    virtual std::vector<Payload> run_recv(const OtBatchSpec& spec,
                                          std::span<const std::uint32_t> choices) = 0;

    virtual OtRole role() const = 0;
};

inline void validate_choices(const OtBatchSpec& spec,
                             std::span<const std::uint32_t> choices) {
    if (choices.size() != spec.count)
        throw OtError("choice count does not match batch spec");
    for (std::uint32_t c : choices)
        if (c >= spec.arity) throw OtError("choice index out of range");
}

}  // namespace xdup::ot
