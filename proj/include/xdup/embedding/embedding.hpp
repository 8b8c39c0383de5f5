#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdup/core/bitstring.hpp"

namespace xdup::embedding {

class EmbeddingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Structured person record: fixed attribute order, empty values allowed.
struct Record {
    // first name, last name, date of birth (YYYY-MM-DD), gender,
    // mother's first name, mother's last name, father's first name
    std::vector<std::string> attributes;

    bool operator==(const Record&) const = default;
};

inline constexpr std::uint32_t kDefaultAttributes = 7;

// gram tagged with its 1-based source attribute index
struct TaggedGram {
    std::uint32_t attr = 0;
    std::string gram;

    auto operator<=>(const TaggedGram&) const = default;
};

// sorted, duplicate-free set of tagged grams
using QGramSet = std::vector<TaggedGram>;

struct EmbeddingParams {
    std::uint32_t l = 511;
    std::uint32_t q = 2;
    std::uint32_t n_a = kDefaultAttributes;
    std::uint64_t master_seed = 0;
    std::uint32_t tau = 132;

    void validate() const {
        if (l < 1 || q < 1 || n_a < 1 || tau > l)
            throw EmbeddingError("invalid embedding parameters");
    }
    // per-bit seed, deterministic from the master seed
    std::uint64_t bit_seed(std::uint32_t i) const;

    // versioned text file so independent parties derive identical seeds
    void save(const std::string& path) const;
    static EmbeddingParams load(const std::string& path);

    bool operator==(const EmbeddingParams&) const = default;
};

// lowercased, whitespace-trimmed copy (ASCII canonicalization)
std::string normalize_attribute(const std::string& value);

QGramSet record_to_grams(const Record& r, std::uint32_t q);

// single LSH bit: parity of a second hash of the gram minimizing a first
// seeded hash; empty set yields 0
bool minhash_bit(const QGramSet& grams, std::uint64_t seed);

BitString embed(const Record& r, const EmbeddingParams& params);
BitString embed_grams(const QGramSet& grams, const EmbeddingParams& params);

struct CalibrationResult {
    std::uint32_t tau = 0;
    double fpr = 0.0;
    double fnr = 0.0;
    bool target_met = false;  // false: no threshold reached the target rate
};

// Largest tau whose false-positive rate (non-duplicate test embeddings whose
// minimum distance to the reference set is <= tau) stays within the target.
CalibrationResult calibrate_threshold(
    const std::vector<BitString>& reference,
    const std::vector<std::pair<BitString, bool>>& labeled_test,
    double target_fpr);

}  // namespace xdup::embedding
