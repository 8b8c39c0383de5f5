#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "xdup/embedding/embedding.hpp"

namespace xdup::embedding {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

// FNV-1a over the tagged gram, strengthened with a finalizer
std::uint64_t gram_hash(const TaggedGram& g) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (int b = 0; b < 4; ++b) {
        h ^= (g.attr >> (8 * b)) & 0xFF;
        h *= 0x100000001b3ull;
    }
    for (unsigned char c : g.gram) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return mix64(h);
}

std::uint64_t seeded(std::uint64_t seed, std::uint64_t base) {
    return mix64(base + seed * 0x9e3779b97f4a7c15ull);
}

constexpr std::uint64_t kSelectStream = 0x53454c4543543164ull;
constexpr std::uint64_t kOutputStream = 0x4f555450555431ull;

}  // namespace

std::uint64_t EmbeddingParams::bit_seed(std::uint32_t i) const {
    return mix64(master_seed ^ (0x6269742d73656564ull + i));
}

void EmbeddingParams::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw EmbeddingError("cannot write parameter file: " + path);
    out << "xdup-embedding-params v1\n";
    out << "l " << l << "\n";
    out << "q " << q << "\n";
    out << "n_a " << n_a << "\n";
    out << "master_seed " << master_seed << "\n";
    out << "tau " << tau << "\n";
    if (!out) throw EmbeddingError("write failed: " + path);
}

EmbeddingParams EmbeddingParams::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EmbeddingError("cannot read parameter file: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "xdup-embedding-params v1")
        throw EmbeddingError("unrecognized parameter file header");
    EmbeddingParams p;
    std::string key;
    while (in >> key) {
        if (key == "l")
            in >> p.l;
        else if (key == "q")
            in >> p.q;
        else if (key == "n_a")
            in >> p.n_a;
        else if (key == "master_seed")
            in >> p.master_seed;
        else if (key == "tau")
            in >> p.tau;
        else
            throw EmbeddingError("unknown parameter key: " + key);
        if (!in) throw EmbeddingError("malformed parameter file");
    }
    p.validate();
    return p;
}

std::string normalize_attribute(const std::string& value) {
    std::size_t b = 0, e = value.size();
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (b < e && is_space(value[b])) ++b;
    while (e > b && is_space(value[e - 1])) --e;
    std::string out;
    out.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
        out.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(value[i]))));
    return out;
}

QGramSet record_to_grams(const Record& r, std::uint32_t q) {
    if (q < 1) throw EmbeddingError("gram length must be at least 1");
    QGramSet out;
    for (std::uint32_t a = 0; a < r.attributes.size(); ++a) {
        std::string v = normalize_attribute(r.attributes[a]);
        if (v.empty()) continue;
        if (v.size() < q) {
            // short values are kept whole rather than padded
            out.push_back({a + 1, v});
            continue;
        }
        for (std::size_t i = 0; i + q <= v.size(); ++i)
            out.push_back({a + 1, v.substr(i, q)});
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool minhash_bit(const QGramSet& grams, std::uint64_t seed) {
    if (grams.empty()) return false;
    std::uint64_t best_key = ~0ull;
    std::uint64_t best_base = 0;
    for (const TaggedGram& g : grams) {
        std::uint64_t base = gram_hash(g);
        std::uint64_t key = seeded(seed ^ kSelectStream, base);
        if (key <= best_key) {
            best_key = key;
            best_base = base;
        }
    }
    return seeded(seed ^ kOutputStream, best_base) & 1;
}

BitString embed_grams(const QGramSet& grams, const EmbeddingParams& params) {
    params.validate();
    BitString out(params.l);
    if (grams.empty()) return out;
    std::vector<std::uint64_t> bases;
    bases.reserve(grams.size());
    for (const TaggedGram& g : grams) bases.push_back(gram_hash(g));
    for (std::uint32_t i = 1; i <= params.l; ++i) {
        std::uint64_t seed = params.bit_seed(i);
        std::uint64_t sel = seed ^ kSelectStream;
        std::uint64_t best_key = ~0ull, best_base = 0;
        for (std::uint64_t base : bases) {
            std::uint64_t key = seeded(sel, base);
            if (key <= best_key) {
                best_key = key;
                best_base = base;
            }
        }
        out.set(i, seeded(seed ^ kOutputStream, best_base) & 1);
    }
    return out;
}

BitString embed(const Record& r, const EmbeddingParams& params) {
    return embed_grams(record_to_grams(r, params.q), params);
}

CalibrationResult calibrate_threshold(
    const std::vector<BitString>& reference,
    const std::vector<std::pair<BitString, bool>>& labeled_test,
    double target_fpr) {
    if (reference.empty() || labeled_test.empty())
        throw EmbeddingError("calibration needs reference and test data");
    if (target_fpr <= 0.0 || target_fpr > 1.0)
        throw EmbeddingError("target rate must be in (0, 1]");
    const std::uint32_t l = reference.front().dimension();

    // histogram of minimum distances to the reference set, per label
    std::vector<std::uint64_t> dup_hist(l + 1, 0), nondup_hist(l + 1, 0);
    std::uint64_t n_dup = 0, n_nondup = 0;
    for (const auto& [emb, is_dup] : labeled_test) {
        std::uint32_t best = l;
        for (const BitString& ref : reference)
            best = std::min(best, hamming_distance(emb, ref));
        (is_dup ? dup_hist : nondup_hist)[best] += 1;
        (is_dup ? n_dup : n_nondup) += 1;
    }

    std::uint64_t fp = 0, tp = 0;
    std::uint32_t best_tau = 0;
    double best_fpr = 0.0, best_fnr = 1.0;
    bool found = false;
    for (std::uint32_t tau = 0; tau <= l; ++tau) {
        fp += nondup_hist[tau];
        tp += dup_hist[tau];
        double fpr = n_nondup ? static_cast<double>(fp) / n_nondup : 0.0;
        if (fpr <= target_fpr) {
            found = true;
            best_tau = tau;
            best_fpr = fpr;
            best_fnr = n_dup ? 1.0 - static_cast<double>(tp) / n_dup : 0.0;
        }
    }
    if (!found) return {0, 1.0, 1.0, false};
    return {best_tau, best_fpr, best_fnr, true};
}

}  // namespace xdup::embedding
