#include <doctest.h>

#include <cstdio>

#include "support/oracle.hpp"
#include "xdup/embedding/embedding.hpp"

using namespace xdup;
using namespace xdup::embedding;

namespace {

QGramSet make_set(std::initializer_list<const char*> grams) {
    QGramSet out;
    for (const char* g : grams) out.push_back({1, g});
    std::sort(out.begin(), out.end());
    return out;
}

double agreement(const QGramSet& x, const QGramSet& y, int n_seeds) {
    int agree = 0;
    for (int s = 0; s < n_seeds; ++s)
        agree += minhash_bit(x, 1000 + s) == minhash_bit(y, 1000 + s);
    return static_cast<double>(agree) / n_seeds;
}

Record sample_record() {
    return Record{{"maria", "lindberg", "1984-03-12", "F", "rosa", "sandmann",
                   "carlos"}};
}

}  // namespace

TEST_CASE("gram extraction basics") {
    Record r{{"ab"}};
    CHECK(record_to_grams(r, 2) == QGramSet{{1, "ab"}});
    Record r2{{"abc"}};
    CHECK(record_to_grams(r2, 2) == QGramSet{{1, "ab"}, {1, "bc"}});
}

TEST_CASE("grams are domain-separated by attribute") {
    Record a{{"abc", ""}};
    Record b{{"", "abc"}};
    auto ga = record_to_grams(a, 2);
    auto gb = record_to_grams(b, 2);
    CHECK(ga.size() == 2);
    CHECK(gb.size() == 2);
    for (const auto& g : ga)
        CHECK(std::find(gb.begin(), gb.end(), g) == gb.end());
}

TEST_CASE("short values are kept whole and empty ones skipped") {
    Record r{{"a", "", "xy"}};
    auto g = record_to_grams(r, 3);
    CHECK(g == QGramSet{{1, "a"}, {3, "xy"}});
}

TEST_CASE("attribute normalization folds case and trims whitespace") {
    CHECK(normalize_attribute("  MiXeD Case \t") == "mixed case");
    Record a{{"ANNA"}}, b{{"anna "}};
    CHECK(record_to_grams(a, 2) == record_to_grams(b, 2));
}

TEST_CASE("embedding is deterministic and zero-distance on equal records") {
    EmbeddingParams params;
    params.l = 127;
    params.tau = 32;
    params.master_seed = 99;
    Record r = sample_record();
    BitString e1 = embed(r, params);
    BitString e2 = embed(r, params);
    CHECK(e1 == e2);
    CHECK(e1.dimension() == 127);
    CHECK(hamming_distance(e1, e2) == 0);
    // empty record embeds to the all-zero string
    CHECK(hamming_weight(embed(Record{{}}, params)) == 0);
}

TEST_CASE("per-bit agreement follows the (1+J)/2 collision law") {
    auto xs = make_set({"aa", "bb", "cc"});
    auto same = xs;
    auto half = make_set({"bb", "cc", "dd"});  // J = 1/2
    auto disj = make_set({"dd", "ee", "ff"});  // J = 0
    const int n = 10000;
    CHECK(agreement(xs, same, n) == 1.0);
    CHECK(std::abs(agreement(xs, half, n) - 0.75) < 0.02);
    CHECK(std::abs(agreement(xs, disj, n) - 0.5) < 0.02);
    // cross-check J with the exact oracle
    std::set<std::string> ox{"aa", "bb", "cc"}, oy{"bb", "cc", "dd"};
    CHECK(oracle::exact_jaccard(ox, oy) == 0.5);
}

TEST_CASE("higher overlap gives lower embedding distance") {
    EmbeddingParams params;
    params.l = 511;
    params.master_seed = 5;
    auto base = make_set({"q0", "q1", "q2", "q3", "q4", "q5", "q6", "q7"});
    double prev = -1.0;
    for (int shared : {0, 2, 4, 6, 8}) {
        QGramSet other;
        for (int i = 0; i < 8; ++i) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), i < shared ? "q%d" : "z%d", i);
            other.push_back({1, buf});
        }
        std::sort(other.begin(), other.end());
        double d = hamming_distance(embed_grams(base, params),
                                    embed_grams(other, params));
        if (prev >= 0) CHECK(d <= prev);
        prev = d;
    }
    CHECK(prev == 0.0);  // full overlap
}

TEST_CASE("parameter files round-trip and reject bad headers") {
    EmbeddingParams p;
    p.l = 511;
    p.q = 2;
    p.master_seed = 123456789;
    p.tau = 132;
    std::string path = "/tmp/xdup_params_test.txt";
    p.save(path);
    CHECK(EmbeddingParams::load(path) == p);

    std::string bad = "/tmp/xdup_params_bad.txt";
    FILE* f = std::fopen(bad.c_str(), "w");
    std::fputs("something else\n", f);
    std::fclose(f);
    CHECK_THROWS_AS(EmbeddingParams::load(bad), EmbeddingError);
}

TEST_CASE("calibration edge cases") {
    EmbeddingParams params;
    params.l = 63;
    params.tau = 16;
    params.master_seed = 7;
    Record r = sample_record();
    BitString e = embed(r, params);
    std::vector<BitString> reference{e};

    // duplicates identical to the reference: FNR 0 at any threshold
    std::vector<std::pair<BitString, bool>> test{{e, true}};
    auto res = calibrate_threshold(reference, test, 1.0);
    CHECK(res.target_met);
    CHECK(res.fnr == 0.0);
    CHECK(res.tau == 63);  // FPR target 1.0 admits the largest threshold

    // a non-duplicate at distance zero cannot meet a sub-1 target
    std::vector<std::pair<BitString, bool>> collide{{e, false}};
    auto res2 = calibrate_threshold(reference, collide, 0.5);
    CHECK_FALSE(res2.target_met);
    CHECK(res2.tau == 0);
}

TEST_CASE("typo perturbations stay close, unrelated records stay far") {
    EmbeddingParams params;
    params.l = 511;
    params.master_seed = 17;
    Record r = sample_record();
    BitString base = embed(r, params);

    Record typo = r;
    typo.attributes[0][2] = 'x';  // single character replacement
    double d_typo = hamming_distance(base, embed(typo, params));
    CHECK(d_typo < 132);

    Record other{{"quentin", "oswaldsen", "1971-11-30", "M", "petra",
                  "novakberg", "ivo"}};
    double d_other = hamming_distance(base, embed(other, params));
    CHECK(d_other > 132);
    CHECK(std::abs(d_other - 255.0) < 60.0);
}
