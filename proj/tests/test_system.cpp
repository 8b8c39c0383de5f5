#include <doctest.h>

#include <filesystem>
#include <thread>

#include "support/oracle.hpp"
#include "support/run_pair.hpp"
#include "xdup/dataset/dataset.hpp"
#include "xdup/system/system.hpp"

using namespace xdup;
using namespace xdup::system;
using net::LoopbackChannel;

namespace {

embedding::EmbeddingParams small_params() {
    embedding::EmbeddingParams p;
    p.l = 63;
    p.tau = 16;
    p.master_seed = 404;
    return p;
}

NodeConfig node_config(std::uint32_t share_id,
                       const embedding::EmbeddingParams& p) {
    NodeConfig c;
    c.share_id = share_id;
    c.l = p.l;
    c.tau = p.tau;
    c.ot_seed = 777;
    return c;
}

struct Cluster {
    NodeService n1, n2;

    explicit Cluster(const embedding::EmbeddingParams& p)
        : n1(node_config(1, p), 101), n2(node_config(2, p), 202) {}
    Cluster(NodeConfig c1, NodeConfig c2)
        : n1(std::move(c1), 101), n2(std::move(c2), 202) {}

    // run one client operation against both nodes' client links
    template <typename F>
    void client_op(F body) {
        auto [c1, s1] = LoopbackChannel::make_pair();
        auto [c2, s2] = LoopbackChannel::make_pair();
        std::exception_ptr body_error;
        std::thread t1([&, sp = s1.get()] {
            try {
                n1.serve_client(*sp);
            } catch (...) {
            }
        });
        std::thread t2([&, sp = s2.get()] {
            try {
                n2.serve_client(*sp);
            } catch (...) {
            }
        });
        try {
            body(*c1, *c2);
        } catch (...) {
            body_error = std::current_exception();
        }
        c1->close();
        c2->close();
        t1.join();
        t2.join();
        if (body_error) std::rethrow_exception(body_error);
    }

    void process(std::uint64_t handle) {
        auto [p1, p2] = LoopbackChannel::make_pair();
        testsupport::run_pair([&, ch = p2.get()] { n2.serve_peer(*ch); },
                              [&, ch = p1.get()] { n1.process(handle, *ch); });
    }
};

std::vector<BitString> embeddings_of(
    const std::vector<embedding::Record>& records,
    const embedding::EmbeddingParams& p) {
    std::vector<BitString> out;
    for (const auto& r : records) out.push_back(embedding::embed(r, p));
    return out;
}

fpsi::MatchMatrix oracle_matrix(const std::vector<BitString>& q,
                                const std::vector<BitString>& r,
                                std::uint32_t tau) {
    fpsi::MatchMatrix m(q.size(), r.size());
    for (auto [i, j] : oracle::bruteforce_fpsi(q, r, tau)) m.set(i, j, true);
    return m;
}

}  // namespace

TEST_CASE("duplicate decoding follows the cumulative length mapping") {
    LengthVector lengths{{7, 0}, {8, 5}, {9, 3}};
    fpsi::MatchMatrix m(1, 8);
    m.set(0, 5, true);  // 1-based column 6
    auto dups = decode_duplicates(m, lengths);
    REQUIRE(dups.size() == 1);
    CHECK(dups[0] == Duplicate{0, 9, 0});  // first record of the third team

    m.set(0, 5, false);
    CHECK(decode_duplicates(m, lengths).empty());

    m.set(0, 0, true);  // column 1 -> second team, first record
    CHECK(decode_duplicates(m, lengths)[0] == Duplicate{0, 8, 0});
    m.set(0, 4, true);  // column 5 -> second team, last record
    CHECK(decode_duplicates(m, lengths)[1] == Duplicate{0, 8, 4});

    fpsi::MatchMatrix wrong(1, 9);
    CHECK_THROWS_AS(decode_duplicates(wrong, lengths), SystemError);
}

TEST_CASE("setup stores XOR shares of the embeddings at both nodes") {
    auto p = small_params();
    Cluster cluster(p);
    TeamClient team(1, p, 1000);
    auto records = dataset::generate_base(5, 42);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team.setup(records, a, b);
    });
    REQUIRE(cluster.n1.team_size(1) == 5);
    REQUIRE(cluster.n2.team_size(1) == 5);
    auto s1 = cluster.n1.team_shares(1);
    auto s2 = cluster.n2.team_shares(1);
    auto embs = embeddings_of(records, p);
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(bitstring_xor(s1[i], s2[i]) == embs[i]);
        CHECK(s1[i] != embs[i]);  // stored shares are blinded
    }

    // empty team still registers
    TeamClient empty(2, p, 1001);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        empty.setup({}, a, b);
    });
    CHECK(cluster.n1.team_size(2) == 0);
    CHECK(cluster.n2.team_size(2) == 0);

    // re-registering a team id fails at the node
    TeamClient again(1, p, 1002);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        CHECK_THROWS_AS(again.setup(records, a, b), net::ProtocolError);
    });
    CHECK(cluster.n1.team_size(1) == 5);
}

TEST_CASE("client share generation is reproducible under a fixed seed") {
    auto p = small_params();
    auto records = dataset::generate_base(4, 9);
    std::vector<BitString> first, second;
    for (int round = 0; round < 2; ++round) {
        Cluster cluster(p);
        TeamClient team(1, p, 31337);
        cluster.client_op([&](net::Channel& a, net::Channel& b) {
            team.setup(records, a, b);
        });
        (round == 0 ? first : second) = cluster.n1.team_shares(1);
    }
    CHECK(first == second);
}

TEST_CASE("offline query matches the brute-force oracle across teams") {
    auto p = small_params();
    Cluster cluster(p);
    TeamClient team1(1, p, 51);
    TeamClient team2(2, p, 52);
    auto own = dataset::generate_base(6, 61);
    auto other = dataset::generate_base(8, 62);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team1.setup(own, a, b);
    });
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team2.setup(other, a, b);
    });

    auto queries = dataset::generate_base(4, 63);
    queries[2] = other[5];  // exact cross-team duplicate
    queries[3] = own[1];    // own-team duplicate must not surface
    std::uint64_t handle = 0;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        handle = team1.query(queries, QueryMode::offline, a, b);
    });
    CHECK(cluster.n1.has_pending(handle));
    cluster.process(handle);
    CHECK(cluster.n1.has_result(handle));
    CHECK_FALSE(cluster.n1.has_pending(handle));

    QueryResult res;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        res = team1.retrieve(handle, a, b);
    });
    REQUIRE(res.matches.nq() == 4);
    REQUIRE(res.matches.nr() == 8);
    CHECK(res.matches ==
          oracle_matrix(embeddings_of(queries, p), embeddings_of(other, p),
                        p.tau));
    // the planted cross-team duplicate decodes to its exact coordinates
    bool found = false;
    for (const auto& d : res.duplicates)
        found |= d == Duplicate{2, 2, 5};
    CHECK(found);
    // own-team columns are excluded entirely
    for (const auto& d : res.duplicates) CHECK(d.org != 1);
    CHECK(res.lengths == LengthVector{{1, 0}, {2, 8}});

    // databases grew by the query size at both nodes, others unchanged
    CHECK(cluster.n1.team_size(1) == 6 + 4);
    CHECK(cluster.n2.team_size(1) == 6 + 4);
    CHECK(cluster.n1.team_size(2) == 8);
    CHECK(cluster.n2.team_size(2) == 8);
    // appended query shares reconstruct to the query embeddings
    auto s1 = cluster.n1.team_shares(1);
    auto s2 = cluster.n2.team_shares(1);
    auto qe = embeddings_of(queries, p);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(bitstring_xor(s1[6 + i], s2[6 + i]) == qe[i]);
}

TEST_CASE("online single-record query uses the unbatched variant") {
    auto p = small_params();
    Cluster cluster(p);
    TeamClient team1(1, p, 71);
    TeamClient team2(2, p, 72);
    auto other = dataset::generate_base(5, 73);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team1.setup({}, a, b);
    });
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team2.setup(other, a, b);
    });
    std::uint64_t handle = 0;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        handle = team1.query({other[3]}, QueryMode::online, a, b);
    });
    cluster.process(handle);
    QueryResult res;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        res = team1.retrieve(handle, a, b);
    });
    REQUIRE(res.duplicates.size() >= 1);
    bool found = false;
    for (const auto& d : res.duplicates) found |= d == Duplicate{0, 2, 3};
    CHECK(found);
    CHECK(res.matches ==
          oracle_matrix(embeddings_of({other[3]}, p),
                        embeddings_of(other, p), p.tau));
}

TEST_CASE("mode and size rules are enforced") {
    auto p = small_params();
    TeamClient team(1, p, 81);
    auto two = dataset::generate_base(2, 82);
    auto [c, s] = LoopbackChannel::make_pair();
    CHECK_THROWS_AS(team.query(two, QueryMode::online, *c, *s), SystemError);
    CHECK_THROWS_AS(team.query({}, QueryMode::offline, *c, *s), SystemError);
    CHECK_THROWS_AS(team.query({two[0]}, QueryMode::offline, *c, *s,
                               SsVariant::batched),
                    SystemError);
}

namespace {

// speaks the client wire protocol directly, bypassing TeamClient, to set up
// a team at a single node only
void raw_register_team(NodeService& node, std::uint32_t team, std::uint32_t l,
                       std::uint32_t tau) {
    auto [c, s] = LoopbackChannel::make_pair();
    std::thread t([&, ch = s.get()] {
        try {
            node.serve_client(*ch);
        } catch (...) {
        }
    });
    net::Writer w;
    w.str(kClientProto);
    w.u32(kSystemVersion);
    w.u8(1);  // setup
    w.u32(team);
    w.u64(0);  // handle
    w.u64(0);  // count
    w.u8(0);
    w.u8(0);
    w.u32(l);
    w.u32(tau);
    c->send_frame(net::FrameType::HELLO, w.buf);
    c->expect(net::FrameType::HELLO);
    c->send_frame(net::FrameType::SHARES_PUT, {});
    c->expect(net::FrameType::SHARES_ACK);
    c->close();
    t.join();
}

}  // namespace

TEST_CASE("a failed processing run leaves both databases untouched") {
    auto p = small_params();
    Cluster cluster(p);
    TeamClient team1(1, p, 91);
    TeamClient team2(2, p, 92);
    auto own = dataset::generate_base(3, 95);
    auto other = dataset::generate_base(4, 93);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team1.setup(own, a, b);
    });
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team2.setup(other, a, b);
    });
    // node 2 alone learns about a third team: its view of the database
    // landscape now disagrees with node 1's
    raw_register_team(cluster.n2, 3, p.l, p.tau);

    auto queries = dataset::generate_base(2, 94);
    std::uint64_t handle = 0;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        handle = team1.query(queries, QueryMode::offline, a, b);
    });
    CHECK_THROWS(cluster.process(handle));
    CHECK_FALSE(cluster.n1.has_result(handle));
    CHECK_FALSE(cluster.n2.has_result(handle));
    CHECK_FALSE(cluster.n1.has_pending(handle));
    CHECK(cluster.n1.team_size(1) == 3);
    CHECK(cluster.n2.team_size(1) == 3);
    // a failed handle reports as failed on retrieval
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        QueryResult res;
        CHECK_THROWS_AS(res = team1.retrieve(handle, a, b),
                        net::ProtocolError);
    });

    // unknown handles are rejected before any peer traffic
    auto [p1, p2] = LoopbackChannel::make_pair();
    CHECK_THROWS_AS(cluster.n1.process(handle + 1, *p1), SystemError);
    CHECK(p1->stats().frames_sent == 0);
}

TEST_CASE("results expire after the configured retention window") {
    auto p = small_params();
    NodeConfig c1 = node_config(1, p);
    NodeConfig c2 = node_config(2, p);
    c1.result_ttl_ms = 0;
    c2.result_ttl_ms = 0;
    Cluster cluster(std::move(c1), std::move(c2));
    TeamClient team1(1, p, 111);
    TeamClient team2(2, p, 112);
    auto other = dataset::generate_base(3, 113);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team1.setup({}, a, b);
    });
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team2.setup(other, a, b);
    });
    std::uint64_t handle = 0;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        handle = team1.query({other[0]}, QueryMode::online, a, b);
    });
    cluster.process(handle);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        QueryResult res;
        CHECK_THROWS_AS(res = team1.retrieve(handle, a, b),
                        net::ProtocolError);
    });
}

TEST_CASE("local pre-deduplication flags matches against own records") {
    auto p = small_params();
    p.tau = 10;  // small l: keep random pairs clear of the threshold
    Cluster cluster(p);
    TeamClient team(1, p, 121);
    auto own = dataset::generate_base(6, 122);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        team.setup(own, a, b);
    });
    auto fresh = dataset::generate_base(2, 123);
    std::vector<embedding::Record> q{fresh[0], own[4], fresh[1]};
    CHECK(team.local_duplicates(q) == std::vector<std::uint64_t>{1});
}

TEST_CASE("share logs replay on restart") {
    auto p = small_params();
    std::string dir1 = "/tmp/xdup_store_n1";
    std::string dir2 = "/tmp/xdup_store_n2";
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
    NodeConfig c1 = node_config(1, p);
    NodeConfig c2 = node_config(2, p);
    c1.store_dir = dir1;
    c2.store_dir = dir2;
    std::vector<BitString> before1, before2;
    {
        Cluster cluster(c1, c2);
        TeamClient team1(1, p, 131);
        TeamClient team2(2, p, 132);
        auto own = dataset::generate_base(4, 133);
        auto other = dataset::generate_base(3, 134);
        cluster.client_op([&](net::Channel& a, net::Channel& b) {
            team1.setup(own, a, b);
        });
        cluster.client_op([&](net::Channel& a, net::Channel& b) {
            team2.setup(other, a, b);
        });
        std::uint64_t handle = 0;
        cluster.client_op([&](net::Channel& a, net::Channel& b) {
            handle = team1.query({other[1]}, QueryMode::online, a, b);
        });
        cluster.process(handle);
        before1 = cluster.n1.team_shares(1);
        before2 = cluster.n2.team_shares(1);
        CHECK(before1.size() == 5);
    }
    Cluster reborn(c1, c2);
    CHECK(reborn.n1.teams() == std::vector<std::uint32_t>{1, 2});
    CHECK(reborn.n1.team_shares(1) == before1);
    CHECK(reborn.n2.team_shares(1) == before2);
    CHECK(reborn.n1.team_size(2) == 3);
}

TEST_CASE("three teams end to end with a planted perturbed duplicate") {
    embedding::EmbeddingParams p;
    p.l = 511;
    p.tau = 132;
    p.master_seed = 2024;
    Cluster cluster(p);
    TeamClient t1(1, p, 141), t2(2, p, 142), t3(3, p, 143);
    auto d1 = dataset::generate_base(16, 151);
    auto d2 = dataset::generate_base(16, 152);
    auto d3 = dataset::generate_base(16, 153);
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        t1.setup(d1, a, b);
    });
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        t2.setup(d2, a, b);
    });
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        t3.setup(d3, a, b);
    });

    // one light typo against a team-2 record, one against team 3
    dataset::PerturbationConfig light;
    light.max_perturbations = 1;
    light.destructive_prob = 0.0;
    Rng prng(154);
    std::vector<embedding::Record> queries = dataset::generate_base(6, 155);
    queries[1] = dataset::perturb(d2[7], light, prng);
    queries[4] = dataset::perturb(d3[2], light, prng);

    std::uint64_t handle = 0;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        handle = t1.query(queries, QueryMode::offline, a, b);
    });
    cluster.process(handle);
    QueryResult res;
    cluster.client_op([&](net::Channel& a, net::Channel& b) {
        res = t1.retrieve(handle, a, b);
    });

    std::vector<BitString> others = embeddings_of(d2, p);
    for (const auto& e : embeddings_of(d3, p)) others.push_back(e);
    CHECK(res.matches ==
          oracle_matrix(embeddings_of(queries, p), others, p.tau));
    bool hit2 = false, hit3 = false;
    for (const auto& d : res.duplicates) {
        hit2 |= d == Duplicate{1, 2, 7};
        hit3 |= d == Duplicate{4, 3, 2};
    }
    CHECK(hit2);
    CHECK(hit3);
    for (std::uint32_t team : {1u, 2u, 3u}) {
        std::uint64_t expect = team == 1 ? 22 : 16;
        CHECK(cluster.n1.team_size(team) == expect);
        CHECK(cluster.n2.team_size(team) == expect);
    }
}
