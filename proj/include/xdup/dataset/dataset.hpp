#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xdup/core/rng.hpp"
#include "xdup/embedding/embedding.hpp"

namespace xdup::dataset {

using embedding::Record;

class DatasetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// schema column names, index-aligned with Record::attributes
const std::vector<std::string>& schema_columns();

enum class EditKind : std::uint8_t { insert, erase, replace, swap_adjacent };

struct PerturbationConfig {
    std::uint32_t max_perturbations = 4;
    double destructive_prob = 1.0 / 16.0;
    // menu of non-destructive character edits for free-text attributes
    std::vector<EditKind> edit_menu{EditKind::insert, EditKind::erase,
                                    EditKind::replace, EditKind::swap_adjacent};
};

Record generate_record(Rng& rng);
std::vector<Record> generate_base(std::uint64_t n, std::uint64_t seed);

Record perturb(const Record& r, const PerturbationConfig& config, Rng& rng);

// duplicate test entry keeps its reference original; non-duplicate entries
// stand alone
struct LabeledPair {
    Record original;
    std::optional<Record> duplicate;

    bool is_duplicate() const { return duplicate.has_value(); }
    const Record& test_record() const {
        return duplicate ? *duplicate : original;
    }
};

struct EvalCorpus {
    std::vector<Record> reference;
    std::vector<LabeledPair> pairs;  // duplicates first, then non-duplicates
};

// duplicates are perturbed copies of reference members; non-duplicate test
// records are freshly generated and outside the reference set
EvalCorpus build_eval_corpus(std::uint64_t n_ref, std::uint64_t n_test_dup,
                             std::uint64_t n_test_nondup, std::uint64_t seed,
                             const PerturbationConfig& config = {});

struct IngestResult {
    std::vector<Record> records;
    std::uint64_t dropped = 0;  // rows failing the completeness rule
};

// CSV with a header row; `mapping[i]` names the column holding attribute i.
// Rows missing a first name, last name, or parseable year of birth are
// dropped and counted.
IngestResult ingest_csv(const std::string& path,
                        const std::vector<std::string>& mapping =
                            schema_columns());

void export_csv(const std::string& path, const std::vector<Record>& records,
                const std::vector<std::string>& labels = {});

struct LabeledIngestResult {
    std::vector<Record> records;
    std::vector<bool> is_duplicate;  // label column equals "dup"
    std::uint64_t dropped = 0;
};

// same completeness rule as ingest_csv; labels stay aligned with kept rows
LabeledIngestResult ingest_labeled_csv(const std::string& path,
                                       const std::string& label_column =
                                           "label",
                                       const std::vector<std::string>& mapping =
                                           schema_columns());

}  // namespace xdup::dataset
