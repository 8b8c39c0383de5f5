#include <doctest.h>

#include "support/run_pair.hpp"
#include "xdup/core/bitpack.hpp"
#include "xdup/core/rng.hpp"
#include "xdup/net/channel.hpp"
#include "xdup/ot/backend.hpp"
#include "xdup/ot/session.hpp"

using namespace xdup;
using namespace xdup::ot;
using testsupport::run_pair;

namespace {

std::vector<std::uint32_t> random_choices(Rng& rng, const OtBatchSpec& spec) {
    std::vector<std::uint32_t> out(spec.count);
    for (auto& c : out) c = static_cast<std::uint32_t>(rng.uniform(spec.arity));
    return out;
}

struct DealerPair {
    std::unique_ptr<net::LoopbackChannel> cha, chb;
    std::shared_ptr<DealerLedger> ledger;
    std::unique_ptr<DealerBackend> sender, receiver;
    OtTranscriptStats s_stats, r_stats;
    OtSenderSession snd;
    OtReceiverSession rcv;

    explicit DealerPair(std::uint64_t seed, bool retain = false)
        : ledger(std::make_shared<DealerLedger>(seed, retain)),
          snd(make(seed, retain)),
          rcv(*chb, *receiver, r_stats) {}

  private:
    OtSenderSession make(std::uint64_t, bool) {
        auto [a, b] = net::LoopbackChannel::make_pair();
        cha = std::move(a);
        chb = std::move(b);
        sender = std::make_unique<DealerBackend>(OtRole::sender, *cha, ledger);
        receiver =
            std::make_unique<DealerBackend>(OtRole::receiver, *chb, ledger);
        return OtSenderSession(*cha, *sender, s_stats);
    }
};

}  // namespace

TEST_CASE("dealer backend hands both roles consistent batches") {
    auto ledger = std::make_shared<DealerLedger>(42, true);
    auto [cha, chb] = net::LoopbackChannel::make_pair();
    DealerBackend sender(OtRole::sender, *cha, ledger);
    DealerBackend receiver(OtRole::receiver, *chb, ledger);
    Rng rng(1);
    for (OtBatchSpec spec : {OtBatchSpec{5, 2, 1}, OtBatchSpec{3, 128, 8},
                             OtBatchSpec{1, 2, 130}}) {
        auto choices = random_choices(rng, spec);
        std::vector<std::vector<Payload>> sent;
        std::vector<Payload> got;
        run_pair([&] { sent = sender.run_send(spec); },
                 [&] { got = receiver.run_recv(spec, choices); });
        REQUIRE(sent.size() == spec.count);
        for (std::uint64_t i = 0; i < spec.count; ++i) {
            REQUIRE(sent[i].size() == spec.arity);
            CHECK(got[i] == sent[i][choices[i]]);
            for (std::uint32_t x = 0; x < spec.arity; ++x)
                CHECK(sent[i][x].size() == spec.message_bytes());
        }
    }
}

TEST_CASE("dealer ledger retains messages and choices for auditing") {
    auto ledger = std::make_shared<DealerLedger>(7, true);
    auto [cha, chb] = net::LoopbackChannel::make_pair();
    DealerBackend sender(OtRole::sender, *cha, ledger);
    DealerBackend receiver(OtRole::receiver, *chb, ledger);
    OtBatchSpec spec{4, 3, 5};
    std::vector<std::uint32_t> choices{2, 0, 1, 2};
    std::vector<std::vector<Payload>> sent;
    std::vector<Payload> got;
    run_pair([&] { sent = sender.run_send(spec); },
             [&] { got = receiver.run_recv(spec, choices); });
    CHECK(ledger->messages(0) == sent);
    CHECK(ledger->choices(0) == choices);
    for (std::uint64_t i = 0; i < spec.count; ++i)
        CHECK(got[i] == sent[i][choices[i]]);
}

TEST_CASE("dealer backend rejects mismatched batch specs") {
    auto ledger = std::make_shared<DealerLedger>(9);
    auto [cha, chb] = net::LoopbackChannel::make_pair();
    DealerBackend sender(OtRole::sender, *cha, ledger);
    DealerBackend receiver(OtRole::receiver, *chb, ledger);
    std::vector<std::uint32_t> choices{0, 1};
    run_pair(
        [&] { sender.run_send({2, 2, 1}); },
        [&] { CHECK_THROWS_AS(receiver.run_recv({2, 2, 8}, choices), OtError); });
}

TEST_CASE("choice validation happens before any traffic") {
    auto ledger = std::make_shared<DealerLedger>(9);
    auto [cha, chb] = net::LoopbackChannel::make_pair();
    DealerBackend receiver(OtRole::receiver, *chb, ledger);
    std::vector<std::uint32_t> bad{0, 5};
    CHECK_THROWS_AS(receiver.run_recv({2, 2, 1}, bad), OtError);
    CHECK(chb->stats().frames_sent == 0);
}

TEST_CASE("group backend satisfies the random OT contract") {
    auto [cha, chb] = net::LoopbackChannel::make_pair();
    Rng srng(10), rrng(11), crng(12);
    GroupBackend sender(OtRole::sender, *cha, srng);
    GroupBackend receiver(OtRole::receiver, *chb, rrng);
    for (OtBatchSpec spec : {OtBatchSpec{8, 2, 1}, OtBatchSpec{4, 5, 16},
                             OtBatchSpec{2, 2, 256}}) {
        auto choices = random_choices(crng, spec);
        std::vector<std::vector<Payload>> sent;
        std::vector<Payload> got;
        run_pair([&] { sent = sender.run_send(spec); },
                 [&] { got = receiver.run_recv(spec, choices); });
        for (std::uint64_t i = 0; i < spec.count; ++i) {
            CHECK(got[i] == sent[i][choices[i]]);
            // the unchosen messages should not leak to the receiver; only
            // meaningful when accidental equality is improbable
            if (spec.message_bits >= 16)
                for (std::uint32_t x = 0; x < spec.arity; ++x)
                    if (x != choices[i]) CHECK(got[i] != sent[i][x]);
        }
    }
}

TEST_CASE("group backend receiver traffic is choice-independent in size") {
    for (std::uint32_t choice : {0u, 1u}) {
        auto [cha, chb] = net::LoopbackChannel::make_pair();
        Rng srng(20), rrng(21);
        GroupBackend sender(OtRole::sender, *cha, srng);
        GroupBackend receiver(OtRole::receiver, *chb, rrng);
        std::vector<std::uint32_t> choices(16, choice);
        run_pair([&] { sender.run_send({16, 2, 1}); },
                 [&] { receiver.run_recv({16, 2, 1}, choices); });
        CHECK(chb->stats().bytes_sent == 16 * 32 + 5);
    }
}

TEST_CASE("group backend refuses messages beyond its native width") {
    auto [cha, chb] = net::LoopbackChannel::make_pair();
    Rng rng(22);
    GroupBackend sender(OtRole::sender, *cha, rng);
    CHECK_THROWS_AS(sender.run_send({1, 2, 257}), OtError);
}

TEST_CASE("chosen OT delivers exactly the selected messages") {
    DealerPair p(100);
    Rng rng(101);
    for (OtBatchSpec spec :
         {OtBatchSpec{6, 2, 1}, OtBatchSpec{4, 3, 7}, OtBatchSpec{3, 8, 16},
          OtBatchSpec{2, 2, 200}}) {
        std::vector<std::vector<Payload>> msgs(spec.count);
        std::uint8_t tail = spec.message_bits % 8 == 0
                                ? 0xFF
                                : (1u << (spec.message_bits % 8)) - 1;
        for (auto& inst : msgs) {
            inst.resize(spec.arity);
            for (auto& m : inst) {
                m = rng.bytes(spec.message_bytes());
                m.back() &= tail;
            }
        }
        auto choices = random_choices(rng, spec);
        std::vector<Payload> got;
        run_pair([&] { p.snd.chosen_ot(spec, msgs); },
                 [&] { got = p.rcv.chosen_ot(spec, choices); });
        for (std::uint64_t i = 0; i < spec.count; ++i)
            CHECK(got[i] == msgs[i][choices[i]]);
    }
}

TEST_CASE("correlated OT reveals only the additive offset message") {
    DealerPair p(200);
    Rng rng(201);
    // eight fields of 9 bits each mod 257
    OtBatchSpec spec{10, 2, 72};
    std::vector<CorrelationFn> fns(spec.count);
    for (auto& f : fns) {
        f.modulus = 257;
        f.field_bits = 9;
        f.add_const.resize(8);
        for (auto& v : f.add_const)
            v = static_cast<std::uint32_t>(rng.uniform(257));
    }
    auto choices = random_choices(rng, spec);
    std::vector<Payload> m0, got;
    run_pair([&] { m0 = p.snd.correlated_ot(spec, fns); },
             [&] { got = p.rcv.correlated_ot(spec, choices); });
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        Payload want = choices[i] == 0 ? m0[i] : fns[i].apply(m0[i]);
        CHECK(got[i] == want);
    }
}

TEST_CASE("correlation function adds field-wise mod p") {
    CorrelationFn f{5, 3, {4, 0, 2}};
    BitWriter w;
    w.put(3, 3);
    w.put(1, 3);
    w.put(4, 3);
    Payload out = f.apply(w.take());
    BitReader r{out};
    CHECK(r.get(3) == 2);
    CHECK(r.get(3) == 1);
    CHECK(r.get(3) == 1);
}

TEST_CASE("1-of-N construction is correct for all choices") {
    DealerPair p(300);
    Rng rng(301);
    for (OtBatchSpec spec :
         {OtBatchSpec{4, 2, 1}, OtBatchSpec{3, 5, 1}, OtBatchSpec{2, 128, 1},
          OtBatchSpec{3, 6, 13}}) {
        std::vector<std::vector<std::uint64_t>> msgs(spec.count);
        for (auto& inst : msgs) {
            inst.resize(spec.arity);
            for (auto& m : inst) m = rng.uniform(1ull << spec.message_bits);
        }
        auto choices = random_choices(rng, spec);
        std::vector<std::uint64_t> got;
        run_pair([&] { p.snd.np_chosen_ot(spec, msgs); },
                 [&] { got = p.rcv.np_chosen_ot(spec, choices); });
        for (std::uint64_t i = 0; i < spec.count; ++i)
            CHECK(got[i] == msgs[i][choices[i]]);
    }
}

TEST_CASE("1-of-N exhaustive over every choice at N = 4") {
    for (std::uint32_t c = 0; c < 4; ++c) {
        DealerPair p(400 + c);
        OtBatchSpec spec{1, 4, 1};
        std::vector<std::vector<std::uint64_t>> msgs{{0, 1, 1, 0}};
        std::vector<std::uint32_t> choices{c};
        std::vector<std::uint64_t> got;
        run_pair([&] { p.snd.np_chosen_ot(spec, msgs); },
                 [&] { got = p.rcv.np_chosen_ot(spec, choices); });
        CHECK(got[0] == msgs[0][c]);
    }
}

TEST_CASE("long payloads run through the PRF extension") {
    DealerPair p(500);
    Rng rng(501);
    OtBatchSpec spec{3, 2, 1000};
    std::vector<std::vector<Payload>> sent;
    std::vector<std::uint32_t> choices{1, 0, 1};
    std::vector<Payload> got;
    run_pair([&] { sent = p.snd.random_ot(spec); },
             [&] { got = p.rcv.random_ot(spec, choices); });
    for (std::uint64_t i = 0; i < spec.count; ++i) {
        CHECK(sent[i][choices[i]].size() == spec.message_bytes());
        CHECK(got[i] == sent[i][choices[i]]);
    }
}

TEST_CASE("transcript stats count OTs by arity and masked payload bits") {
    DealerPair p(600);
    Rng rng(601);

    OtBatchSpec rand_spec{5, 2, 1};
    auto rc = random_choices(rng, rand_spec);
    run_pair([&] { p.snd.random_ot(rand_spec); },
             [&] { p.rcv.random_ot(rand_spec, rc); });
    CHECK(p.s_stats.payload_bits_sent == 0);

    OtBatchSpec chosen_spec{3, 4, 7};
    std::vector<std::vector<Payload>> msgs(3,
                                           std::vector<Payload>(4, Payload{0}));
    auto cc = random_choices(rng, chosen_spec);
    run_pair([&] { p.snd.chosen_ot(chosen_spec, msgs); },
             [&] { p.rcv.chosen_ot(chosen_spec, cc); });

    OtBatchSpec corr_spec{4, 2, 9};
    std::vector<CorrelationFn> fns(4, CorrelationFn{512, 9, {3}});
    auto xc = random_choices(rng, corr_spec);
    run_pair([&] { p.snd.correlated_ot(corr_spec, fns); },
             [&] { p.rcv.correlated_ot(corr_spec, xc); });

    OtBatchSpec np_spec{2, 128, 1};
    std::vector<std::vector<std::uint64_t>> bits(
        2, std::vector<std::uint64_t>(128, 0));
    auto nc = random_choices(rng, np_spec);
    run_pair([&] { p.snd.np_chosen_ot(np_spec, bits); },
             [&] { p.rcv.np_chosen_ot(np_spec, nc); });

    for (const OtTranscriptStats* st : {&p.s_stats, &p.r_stats}) {
        CHECK(st->ot_count(2) == 5 + 4);
        CHECK(st->ot_count(4) == 3);
        CHECK(st->ot_count(128) == 2);
        CHECK(st->total_ots() == 14);
        // 3*4*7 chosen + 4*1*9 correlated + 2*128*1 one-of-N
        CHECK(st->payload_bits_sent == 84 + 36 + 256);
    }
}
