#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "xdup/core/rng.hpp"
#include "xdup/net/channel.hpp"
#include "xdup/ot/ot.hpp"

namespace xdup::ot {

// Trusted in-process ledger realizing the ideal random-OT functionality for
// tests and local benchmarks. Messages are derived deterministically from
// (seed, batch seq), so both roles observe the same batch regardless of
// scheduling. Choices are recorded but never transmitted.
class DealerLedger {
  public:
    explicit DealerLedger(std::uint64_t seed, bool retain = false)
        : seed_(seed), retain_(retain) {}

    std::vector<std::vector<Payload>> fetch(std::uint64_t seq,
                                            const OtBatchSpec& spec,
                                            OtRole role);
    void record_choices(std::uint64_t seq, std::vector<std::uint32_t> choices);

    // test-harness access; requires retain = true
    std::vector<std::vector<Payload>> messages(std::uint64_t seq) const;
    std::vector<std::uint32_t> choices(std::uint64_t seq) const;

  private:
    struct Batch {
        std::vector<std::vector<Payload>> messages;
        std::vector<std::uint32_t> choices;
        int fetched = 0;
    };

    std::vector<std::vector<Payload>>& materialize(std::uint64_t seq,
                                                   const OtBatchSpec& spec);

    std::uint64_t seed_;
    bool retain_;
    mutable std::mutex mu_;
    std::unordered_map<std::uint64_t, Batch> batches_;
};

class DealerBackend final : public RandomOtBackend {
  public:
    DealerBackend(OtRole role, net::Channel& channel,
                  std::shared_ptr<DealerLedger> ledger)
        : role_(role), ch_(channel), ledger_(std::move(ledger)) {}

    std::vector<std::vector<Payload>> run_send(const OtBatchSpec& spec) override;
    std::vector<Payload> run_recv(const OtBatchSpec& spec,
                                  std::span<const std::uint32_t> choices) override;
    OtRole role() const override { return role_; }

  private:
    OtRole role_;
    net::Channel& ch_;
    std::shared_ptr<DealerLedger> ledger_;
    std::uint64_t next_seq_ = 0;
};

// Computational base OT over ristretto255: per-instance Diffie-Hellman key
// agreement in the style of the simplest-OT protocol, semi-honest. Native
// message width is capped at 256 bits; longer payloads go through the PRF
// extension in the session layer.
class GroupBackend final : public RandomOtBackend {
  public:
    GroupBackend(OtRole role, net::Channel& channel, Rng& rng)
        : role_(role), ch_(channel), rng_(rng) {}

    std::vector<std::vector<Payload>> run_send(const OtBatchSpec& spec) override;
    std::vector<Payload> run_recv(const OtBatchSpec& spec,
                                  std::span<const std::uint32_t> choices) override;
    OtRole role() const override { return role_; }

    static constexpr std::uint32_t kMaxNativeBits = 256;

  private:
    OtRole role_;
    net::Channel& ch_;
    Rng& rng_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace xdup::ot
