#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "xdup/core/bitstring.hpp"
#include "xdup/net/channel.hpp"
#include "xdup/ot/ot.hpp"

namespace xdup::fpsi {

class FpsiError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Raised when the batched secret-shared variant is requested with a single
// query element; the caller should fall back to the unbatched variant.
class BatchingInapplicable : public FpsiError {
  public:
    using FpsiError::FpsiError;
};

inline constexpr std::uint32_t kFpsiVersion = 1;
inline constexpr const char* kProtoPlain = "FPSI";
inline constexpr const char* kProtoSs = "SSFPSI";
inline constexpr const char* kProtoSsb = "SSBFPSI";

// which OT flavor carries the distance-phase messages
enum class DistanceOtMode : std::uint8_t { correlated = 0, chosen = 1 };

struct FpsiParams {
    std::uint32_t l = 0;    // dimension; modulus is p = l + 1
    std::uint32_t tau = 0;  // Hamming threshold
    std::uint64_t nq = 0;
    std::uint64_t nr = 0;

    std::uint32_t p() const { return l + 1; }
    std::uint32_t residue_bits() const { return std::bit_width(l); }

    void validate() const {
        if (l < 1 || tau > l || nq < 1 || nr < 1)
            throw FpsiError("invalid protocol parameters");
    }
    bool operator==(const FpsiParams&) const = default;
};

// nQ x nR bit matrix of matches, 0-indexed
class MatchMatrix {
  public:
    MatchMatrix() = default;
    MatchMatrix(std::uint64_t nq, std::uint64_t nr)
        : nq_(nq), nr_(nr), bits_(nq * nr, 0) {}

    std::uint64_t nq() const { return nq_; }
    std::uint64_t nr() const { return nr_; }
    bool get(std::uint64_t i, std::uint64_t j) const {
        return bits_[i * nr_ + j];
    }
    void set(std::uint64_t i, std::uint64_t j, bool v) {
        bits_[i * nr_ + j] = v;
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> index_set() const {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
        for (std::uint64_t i = 0; i < nq_; ++i)
            for (std::uint64_t j = 0; j < nr_; ++j)
                if (get(i, j)) out.emplace_back(i, j);
        return out;
    }

    bool operator==(const MatchMatrix&) const = default;

  private:
    std::uint64_t nq_ = 0, nr_ = 0;
    std::vector<std::uint8_t> bits_;
};

// one node's XOR share of a MatchMatrix
struct SharedMatchMatrix {
    std::uint32_t share_id = 1;  // 1 or 2
    MatchMatrix share;
};

inline MatchMatrix reconstruct_matches(const SharedMatchMatrix& a,
                                       const SharedMatchMatrix& b) {
    if (a.share.nq() != b.share.nq() || a.share.nr() != b.share.nr())
        throw FpsiError("share dimension mismatch");
    MatchMatrix out(a.share.nq(), a.share.nr());
    for (std::uint64_t i = 0; i < out.nq(); ++i)
        for (std::uint64_t j = 0; j < out.nr(); ++j)
            out.set(i, j, a.share.get(i, j) != b.share.get(i, j));
    return out;
}

// Handshake: the initiator proposes (protocol, version, params, mode); the
// responder checks them against its own expectation and acknowledges.
void handshake_initiate(net::Channel& ch, const std::string& protocol,
                        const FpsiParams& params, DistanceOtMode mode);
void handshake_respond(net::Channel& ch, const std::string& protocol,
                       const FpsiParams& params, DistanceOtMode mode);

void check_elements(const std::vector<BitString>& set, std::uint64_t n,
                    std::uint32_t l);

}  // namespace xdup::fpsi
