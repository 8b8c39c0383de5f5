#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "xdup/dataset/dataset.hpp"

namespace xdup::dataset {

namespace {

constexpr std::uint32_t kFirstName = 0;
constexpr std::uint32_t kLastName = 1;
constexpr std::uint32_t kDob = 2;
constexpr std::uint32_t kGender = 3;
constexpr std::uint32_t kMotherFirst = 4;
constexpr std::uint32_t kMotherLast = 5;
constexpr std::uint32_t kFatherFirst = 6;

std::vector<std::string> cross(const std::vector<std::string>& a,
                               const std::vector<std::string>& b,
                               const std::vector<std::string>& c) {
    std::vector<std::string> out;
    out.reserve(a.size() * b.size() * c.size());
    for (const auto& x : a)
        for (const auto& y : b)
            for (const auto& z : c) out.push_back(x + y + z);
    return out;
}

// synthetic name pools built from syllables, standing in for an external
// registration database
const std::vector<std::string>& male_pool() {
    static const std::vector<std::string> pool = cross(
        {"al", "ben", "car", "dan", "ed", "fran", "gar", "hen", "iv", "jor",
         "kal", "lu", "mar", "nor", "os", "pet", "rob", "sam", "tom", "vic"},
        {"", "a", "e", "i", "o", "ur"},
        {"o", "us", "an", "er", "io", "ald", "in", "ton", "rick", "as"});
    return pool;
}

const std::vector<std::string>& female_pool() {
    static const std::vector<std::string> pool = cross(
        {"an", "bel", "cla", "dor", "el", "fio", "gra", "hel", "is", "ju",
         "kat", "lil", "mia", "nel", "ol", "pau", "ros", "sof", "tal", "ver"},
        {"", "a", "e", "i", "o", "ur"},
        {"a", "ia", "ine", "ella", "eth", "ara", "ssa", "na", "lyn", "ora"});
    return pool;
}

const std::vector<std::string>& last_pool() {
    static const std::vector<std::string> pool = cross(
        {"ander", "berg", "carl", "dav", "erik", "fern", "gart", "holm",
         "ibar", "jans", "kov", "lind", "mora", "nov", "ols", "pet", "quist",
         "ram", "sand", "tor"},
        {"", "a", "e", "o", "s", "en"},
        {"son", "sen", "ez", "mann", "berg", "strom", "ley", "ford", "wood",
         "field"});
    return pool;
}

std::string pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[rng.uniform(pool.size())];
}

std::string random_dob(Rng& rng) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04u-%02u-%02u",
                  static_cast<unsigned>(1940 + rng.uniform(66)),
                  static_cast<unsigned>(1 + rng.uniform(12)),
                  static_cast<unsigned>(1 + rng.uniform(28)));
    return buf;
}

char random_letter(Rng& rng) {
    return static_cast<char>('a' + rng.uniform(26));
}

const std::vector<std::string>& replacement_pool(std::uint32_t attr,
                                                 Rng& rng) {
    switch (attr) {
        case kFirstName:
            return rng.bit() ? male_pool() : female_pool();
        case kMotherFirst:
            return female_pool();
        case kFatherFirst:
            return male_pool();
        default:
            return last_pool();
    }
}

void edit_text(std::string& v, const PerturbationConfig& config, Rng& rng) {
    if (v.empty()) {
        v.push_back(random_letter(rng));
        return;
    }
    EditKind kind = config.edit_menu[rng.uniform(config.edit_menu.size())];
    std::size_t pos = rng.uniform(v.size());
    switch (kind) {
        case EditKind::insert:
            v.insert(v.begin() + rng.uniform(v.size() + 1),
                     random_letter(rng));
            break;
        case EditKind::erase:
            if (v.size() > 1) v.erase(v.begin() + pos);
            break;
        case EditKind::replace:
            v[pos] = random_letter(rng);
            break;
        case EditKind::swap_adjacent:
            if (v.size() >= 2) {
                std::size_t i = rng.uniform(v.size() - 1);
                std::swap(v[i], v[i + 1]);
            }
            break;
    }
}

std::string record_key(const Record& r) {
    std::string key;
    for (const auto& a : r.attributes) {
        key += a;
        key.push_back('\x1f');
    }
    return key;
}

// minimal CSV with double-quote escaping
std::vector<std::string> parse_csv_row(const std::string& line,
                                       std::uint64_t row_no) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back().push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back().push_back(c);
            }
        } else if (c == '"') {
            if (!fields.back().empty())
                throw DatasetError("row " + std::to_string(row_no) +
                                   ": stray quote");
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back().push_back(c);
        }
    }
    if (quoted)
        throw DatasetError("row " + std::to_string(row_no) +
                           ": unterminated quote");
    return fields;
}

std::string csv_escape(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

bool has_year(const std::string& dob) {
    if (dob.size() < 4) return false;
    for (int i = 0; i < 4; ++i)
        if (dob[i] < '0' || dob[i] > '9') return false;
    return true;
}

}  // namespace

const std::vector<std::string>& schema_columns() {
    static const std::vector<std::string> cols{
        "first_name",   "last_name",   "date_of_birth", "gender",
        "mother_first", "mother_last", "father_first"};
    return cols;
}

Record generate_record(Rng& rng) {
    Record r;
    r.attributes.resize(embedding::kDefaultAttributes);
    bool male = rng.bit();
    r.attributes[kFirstName] = pick(male ? male_pool() : female_pool(), rng);
    r.attributes[kLastName] = pick(last_pool(), rng);
    r.attributes[kDob] = random_dob(rng);
    r.attributes[kGender] = male ? "M" : "F";
    r.attributes[kMotherFirst] = pick(female_pool(), rng);
    r.attributes[kMotherLast] = pick(last_pool(), rng);
    r.attributes[kFatherFirst] = pick(male_pool(), rng);
    return r;
}

std::vector<Record> generate_base(std::uint64_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Record> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(generate_record(rng));
    return out;
}

Record perturb(const Record& r, const PerturbationConfig& config, Rng& rng) {
    if (config.edit_menu.empty())
        throw DatasetError("empty perturbation menu");
    Record out = r;
    std::uint32_t n =
        1 + static_cast<std::uint32_t>(rng.uniform(config.max_perturbations));
    for (std::uint32_t t = 0; t < n; ++t) {
        std::uint32_t attr =
            static_cast<std::uint32_t>(rng.uniform(out.attributes.size()));
        std::string& v = out.attributes[attr];
        double u = static_cast<double>(rng.next_u64()) / 18446744073709551616.0;
        bool destructive = u < config.destructive_prob;
        if (attr == kDob) {
            // fixed-length field: never length-changed
            if (destructive)
                v = random_dob(rng);
            else if (v.size() == 10)
                v = v.substr(0, 4) + "-01-01";
        } else if (attr == kGender) {
            v = rng.bit() ? "M" : "F";
        } else if (destructive) {
            if (rng.bit())
                v.clear();
            else
                v = pick(replacement_pool(attr, rng), rng);
        } else {
            edit_text(v, config, rng);
        }
    }
    return out;
}

EvalCorpus build_eval_corpus(std::uint64_t n_ref, std::uint64_t n_test_dup,
                             std::uint64_t n_test_nondup, std::uint64_t seed,
                             const PerturbationConfig& config) {
    Rng rng(seed);
    EvalCorpus corpus;
    corpus.reference.reserve(n_ref);
    std::unordered_set<std::string> keys;
    for (std::uint64_t i = 0; i < n_ref; ++i) {
        corpus.reference.push_back(generate_record(rng));
        keys.insert(record_key(corpus.reference.back()));
    }
    for (std::uint64_t i = 0; i < n_test_dup; ++i) {
        const Record& orig = corpus.reference[rng.uniform(n_ref)];
        corpus.pairs.push_back({orig, perturb(orig, config, rng)});
    }
    for (std::uint64_t i = 0; i < n_test_nondup; ++i) {
        Record fresh = generate_record(rng);
        while (keys.count(record_key(fresh))) fresh = generate_record(rng);
        corpus.pairs.push_back({std::move(fresh), std::nullopt});
    }
    return corpus;
}

IngestResult ingest_csv(const std::string& path,
                        const std::vector<std::string>& mapping) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) return {};
    auto header = parse_csv_row(line, 1);
    std::vector<std::size_t> col(mapping.size());
    for (std::size_t a = 0; a < mapping.size(); ++a) {
        auto it = std::find(header.begin(), header.end(), mapping[a]);
        if (it == header.end())
            throw DatasetError("missing column: " + mapping[a]);
        col[a] = static_cast<std::size_t>(it - header.begin());
    }
    IngestResult res;
    std::uint64_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        auto fields = parse_csv_row(line, row_no);
        if (fields.size() != header.size())
            throw DatasetError("row " + std::to_string(row_no) +
                               ": expected " + std::to_string(header.size()) +
                               " fields, got " +
                               std::to_string(fields.size()));
        Record r;
        r.attributes.resize(mapping.size());
        for (std::size_t a = 0; a < mapping.size(); ++a)
            r.attributes[a] = fields[col[a]];
        // completeness rule: first name, last name, and year of birth
        if (r.attributes[kFirstName].empty() ||
            r.attributes[kLastName].empty() || !has_year(r.attributes[kDob])) {
            ++res.dropped;
            continue;
        }
        res.records.push_back(std::move(r));
    }
    return res;
}

LabeledIngestResult ingest_labeled_csv(const std::string& path,
                                       const std::string& label_column,
                                       const std::vector<std::string>& mapping) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) return {};
    auto header = parse_csv_row(line, 1);
    std::vector<std::size_t> col(mapping.size());
    for (std::size_t a = 0; a < mapping.size(); ++a) {
        auto it = std::find(header.begin(), header.end(), mapping[a]);
        if (it == header.end())
            throw DatasetError("missing column: " + mapping[a]);
        col[a] = static_cast<std::size_t>(it - header.begin());
    }
    auto lit = std::find(header.begin(), header.end(), label_column);
    if (lit == header.end())
        throw DatasetError("missing column: " + label_column);
    std::size_t label_col = static_cast<std::size_t>(lit - header.begin());

    LabeledIngestResult res;
    std::uint64_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty()) continue;
        auto fields = parse_csv_row(line, row_no);
        if (fields.size() != header.size())
            throw DatasetError("row " + std::to_string(row_no) +
                               ": expected " + std::to_string(header.size()) +
                               " fields, got " +
                               std::to_string(fields.size()));
        Record r;
        r.attributes.resize(mapping.size());
        for (std::size_t a = 0; a < mapping.size(); ++a)
            r.attributes[a] = fields[col[a]];
        if (r.attributes[kFirstName].empty() ||
            r.attributes[kLastName].empty() || !has_year(r.attributes[kDob])) {
            ++res.dropped;
            continue;
        }
        res.records.push_back(std::move(r));
        res.is_duplicate.push_back(fields[label_col] == "dup");
    }
    return res;
}

void export_csv(const std::string& path, const std::vector<Record>& records,
                const std::vector<std::string>& labels) {
    if (!labels.empty() && labels.size() != records.size())
        throw DatasetError("label count does not match record count");
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write: " + path);
    const auto& cols = schema_columns();
    for (std::size_t c = 0; c < cols.size(); ++c)
        out << (c ? "," : "") << cols[c];
    if (!labels.empty()) out << ",label";
    out << "\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& attrs = records[i].attributes;
        for (std::size_t c = 0; c < attrs.size(); ++c)
            out << (c ? "," : "") << csv_escape(attrs[c]);
        if (!labels.empty()) out << "," << csv_escape(labels[i]);
        out << "\n";
    }
    if (!out) throw DatasetError("write failed: " + path);
}

}  // namespace xdup::dataset
