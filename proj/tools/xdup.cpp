#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "support/oracle.hpp"
#include "xdup/dataset/dataset.hpp"
#include "xdup/fpsi/plain.hpp"
#include "xdup/fpsi/ss.hpp"
#include "xdup/net/tcp.hpp"
#include "xdup/ot/backend.hpp"
#include "xdup/system/system.hpp"

using namespace xdup;

namespace {

// ---------------------------------------------------------------- helpers

net::NetShape parse_shape(const std::string& s) {
    if (s == "gigabit") return net::NetShape::gigabit();
    if (s == "slow") return net::NetShape::slow();
    return net::NetShape::unshaped();
}

std::unique_ptr<ot::RandomOtBackend> make_backend(const std::string& kind,
                                                  ot::OtRole role,
                                                  net::Channel& ch,
                                                  std::uint64_t seed,
                                                  Rng& rng) {
    if (kind == "group")
        return std::make_unique<ot::GroupBackend>(role, ch, rng);
    return std::make_unique<ot::DealerBackend>(
        role, ch, std::make_shared<ot::DealerLedger>(seed));
}

std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& s) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("endpoint must be host:port: " + s);
    return {s.substr(0, colon),
            static_cast<std::uint16_t>(std::stoul(s.substr(colon + 1)))};
}

std::vector<BitString> random_set(Rng& rng, std::uint64_t n, std::uint32_t l) {
    std::vector<BitString> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i)
        out.push_back(sample_bitstring(rng, l));
    return out;
}

void save_embeddings(const std::string& path,
                     const std::vector<BitString>& embs, std::uint32_t l) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write: " + path);
    std::fprintf(f, "xdup-embeddings v1\nl %u\nn %zu\n", l, embs.size());
    for (const BitString& e : embs) {
        for (std::uint8_t b : e.bytes()) std::fprintf(f, "%02x", b);
        std::fputc('\n', f);
    }
    std::fclose(f);
}

// ------------------------------------------------------------ subcommands

int cmd_gen_data(std::uint64_t n, std::uint64_t dups, std::uint64_t nondups,
                 std::uint64_t seed, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto corpus = dataset::build_eval_corpus(n, dups, nondups, seed, {});
    dataset::export_csv(out_dir + "/reference.csv", corpus.reference);
    std::vector<embedding::Record> test;
    std::vector<std::string> labels;
    for (const auto& pair : corpus.pairs) {
        test.push_back(pair.test_record());
        labels.push_back(pair.is_duplicate() ? "dup" : "nondup");
    }
    dataset::export_csv(out_dir + "/test.csv", test, labels);
    std::printf("reference=%zu test=%zu out=%s\n", corpus.reference.size(),
                test.size(), out_dir.c_str());
    return 0;
}

int cmd_embed(const std::string& params_path, const std::string& in,
              const std::string& out) {
    auto params = embedding::EmbeddingParams::load(params_path);
    auto ingest = dataset::ingest_csv(in);
    std::vector<BitString> embs;
    for (const auto& r : ingest.records)
        embs.push_back(embedding::embed(r, params));
    save_embeddings(out, embs, params.l);
    std::printf("embedded=%zu dropped=%llu\n", embs.size(),
                static_cast<unsigned long long>(ingest.dropped));
    return 0;
}

int cmd_calibrate(const std::string& params_path, const std::string& ref_csv,
                  const std::string& test_csv, std::uint64_t n_ref,
                  std::uint64_t n_dup, std::uint64_t n_nondup,
                  std::uint64_t seed, double target_fpr,
                  const std::string& save_params) {
    embedding::EmbeddingParams params;
    if (!params_path.empty())
        params = embedding::EmbeddingParams::load(params_path);

    std::vector<BitString> reference;
    std::vector<std::pair<BitString, bool>> test;
    if (!ref_csv.empty()) {
        auto ref = dataset::ingest_csv(ref_csv);
        if (ref.dropped)
            throw std::runtime_error("reference rows failed completeness");
        auto lab = dataset::ingest_labeled_csv(test_csv);
        for (const auto& r : ref.records)
            reference.push_back(embedding::embed(r, params));
        for (std::size_t i = 0; i < lab.records.size(); ++i)
            test.emplace_back(embedding::embed(lab.records[i], params),
                              lab.is_duplicate[i]);
    } else {
        auto corpus = dataset::build_eval_corpus(n_ref, n_dup, n_nondup, seed,
                                                 {});
        for (const auto& r : corpus.reference)
            reference.push_back(embedding::embed(r, params));
        for (const auto& pair : corpus.pairs)
            test.emplace_back(embedding::embed(pair.test_record(), params),
                              pair.is_duplicate());
    }
    auto res = embedding::calibrate_threshold(reference, test, target_fpr);
    std::printf("tau=%u fpr=%.6f fnr=%.6f target_met=%d\n", res.tau, res.fpr,
                res.fnr, res.target_met ? 1 : 0);
    if (!save_params.empty()) {
        params.tau = res.tau;
        params.save(save_params);
    }
    return res.target_met ? 0 : 1;
}

struct BenchRow {
    double wall_ms = 0;
    net::ChannelStats a_stats, b_stats;
    ot::OtTranscriptStats ot;
};

BenchRow bench_once(const std::string& protocol, const fpsi::FpsiParams& params,
                    const std::string& ot_kind, net::NetShape shape,
                    std::uint64_t seed) {
    auto [ca, cb] = net::LoopbackChannel::make_pair(shape);
    Rng data_rng(seed);
    BenchRow row;
    if (protocol == "plain") {
        auto Q = random_set(data_rng, params.nq, params.l);
        auto R = random_set(data_rng, params.nr, params.l);
        auto t0 = std::chrono::steady_clock::now();
        std::exception_ptr eb;
        std::thread tb([&, ch = cb.get()] {
            try {
                Rng rng(seed + 1);
                auto backend = make_backend(ot_kind, ot::OtRole::sender, *ch,
                                            seed + 7, rng);
                fpsi::otfpsi_run_responder(*ch, *backend, R, params, rng);
            } catch (...) {
                eb = std::current_exception();
            }
        });
        Rng rng(seed + 2);
        auto backend =
            make_backend(ot_kind, ot::OtRole::receiver, *ca, seed + 7, rng);
        auto res = fpsi::otfpsi_run_querier(*ca, *backend, Q, params);
        tb.join();
        if (eb) std::rethrow_exception(eb);
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        row.ot = res.ot;
    } else {
        auto q1 = random_set(data_rng, params.nq, params.l);
        auto q2 = random_set(data_rng, params.nq, params.l);
        auto r1 = random_set(data_rng, params.nr, params.l);
        auto r2 = random_set(data_rng, params.nr, params.l);
        bool batched = protocol == "ssb";
        auto t0 = std::chrono::steady_clock::now();
        std::exception_ptr eb;
        std::thread tb([&, ch = cb.get()] {
            try {
                Rng rng(seed + 1);
                auto backend = make_backend(ot_kind, ot::OtRole::sender, *ch,
                                            seed + 7, rng);
                if (batched)
                    fpsi::otfpsi_ssb_run_s2(*ch, *backend, q2, r2, params, rng);
                else
                    fpsi::otfpsi_ss_run_s2(*ch, *backend, q2, r2, params, rng);
            } catch (...) {
                eb = std::current_exception();
            }
        });
        Rng rng(seed + 2);
        auto backend =
            make_backend(ot_kind, ot::OtRole::receiver, *ca, seed + 7, rng);
        auto res = batched
                       ? fpsi::otfpsi_ssb_run_s1(*ca, *backend, q1, r1, params)
                       : fpsi::otfpsi_ss_run_s1(*ca, *backend, q1, r1, params);
        tb.join();
        if (eb) std::rethrow_exception(eb);
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        row.ot = res.ot;
    }
    row.a_stats = ca->stats();
    row.b_stats = cb->stats();
    return row;
}

int cmd_bench_fpsi(const std::string& protocol, std::uint32_t l,
                   std::uint32_t tau, std::uint64_t nq, std::uint64_t nr,
                   const std::string& ot_kind, const std::string& shape,
                   std::uint64_t seed, unsigned repeat) {
    fpsi::FpsiParams params{l, tau, nq, nr};
    params.validate();
    std::printf(
        "protocol,l,tau,nq,nr,ot,shape,rep,wall_ms,"
        "a_bytes_sent,a_bytes_recv,b_bytes_sent,b_bytes_recv,"
        "ot_total,ot_payload_bits\n");
    for (unsigned rep = 0; rep < repeat; ++rep) {
        BenchRow row = bench_once(protocol, params, ot_kind,
                                  parse_shape(shape), seed + rep);
        std::printf("%s,%u,%u,%llu,%llu,%s,%s,%u,%.3f,%llu,%llu,%llu,%llu,"
                    "%llu,%llu\n",
                    protocol.c_str(), l, tau,
                    static_cast<unsigned long long>(nq),
                    static_cast<unsigned long long>(nr), ot_kind.c_str(),
                    shape.c_str(), rep, row.wall_ms,
                    static_cast<unsigned long long>(row.a_stats.bytes_sent),
                    static_cast<unsigned long long>(row.a_stats.bytes_received),
                    static_cast<unsigned long long>(row.b_stats.bytes_sent),
                    static_cast<unsigned long long>(row.b_stats.bytes_received),
                    static_cast<unsigned long long>(row.ot.total_ots()),
                    static_cast<unsigned long long>(row.ot.payload_bits_sent));
    }
    return 0;
}

int cmd_oracle_check(unsigned instances, std::uint32_t max_l,
                     std::uint64_t max_n, std::uint64_t seed) {
    Rng rng(seed);
    const std::uint32_t dims[] = {7, 15, 31, 63, 127};
    unsigned failures = 0;
    for (unsigned t = 0; t < instances; ++t) {
        std::uint32_t l = dims[rng.uniform(5)];
        while (l > max_l) l = dims[rng.uniform(5)];
        fpsi::FpsiParams params{l,
                                static_cast<std::uint32_t>(rng.uniform(l + 1)),
                                1 + rng.uniform(max_n), 1 + rng.uniform(max_n)};
        auto Q = random_set(rng, params.nq, l);
        auto R = random_set(rng, params.nr, l);
        auto [ca, cb] = net::LoopbackChannel::make_pair();
        auto ledger = std::make_shared<ot::DealerLedger>(rng.next_u64());
        std::exception_ptr eb;
        std::thread tb([&, ch = cb.get()] {
            try {
                Rng r2(t * 7919 + 13);
                ot::DealerBackend backend(ot::OtRole::sender, *ch, ledger);
                fpsi::otfpsi_run_responder(*ch, backend, R, params, r2);
            } catch (...) {
                eb = std::current_exception();
            }
        });
        ot::DealerBackend backend(ot::OtRole::receiver, *ca, ledger);
        auto res = fpsi::otfpsi_run_querier(*ca, backend, Q, params);
        tb.join();
        if (eb) std::rethrow_exception(eb);
        auto expect = oracle::bruteforce_fpsi(Q, R, params.tau);
        auto alt = oracle::bruteforce_fpsi_alt(Q, R, params.tau);
        if (res.matches.index_set() != expect || expect != alt) {
            std::fprintf(stderr, "mismatch at instance %u (l=%u tau=%u)\n", t,
                         params.l, params.tau);
            ++failures;
        }
    }
    std::printf("instances=%u failures=%u\n", instances, failures);
    return failures == 0 ? 0 : 1;
}

int cmd_node(std::uint32_t id, std::uint16_t peer_port,
             std::uint16_t client_port, std::string store,
             std::uint32_t l, std::uint32_t tau, std::uint64_t ot_seed,
             const std::string& peer_endpoint, bool group_ot) {
    if (const char* env = std::getenv("XDUP_STORE")) store = env;
    system::NodeConfig config;
    config.share_id = id;
    config.l = l;
    config.tau = tau;
    config.store_dir = store;
    config.ot_seed = ot_seed;
    config.use_group_ot = group_ot;
    system::NodeService node(config, std::random_device{}());
    if (!peer_endpoint.empty()) {
        auto [host, port] = parse_endpoint(peer_endpoint);
        node.set_peer_dialer([host, port]() -> std::unique_ptr<net::Channel> {
            return net::TcpChannel::connect(host, port);
        });
    }
    std::thread peer_thread([&] {
        net::TcpListener listener(peer_port);
        for (;;) {
            auto ch = listener.accept();
            try {
                node.serve_peer(*ch);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "peer session: %s\n", e.what());
            }
        }
    });
    net::TcpListener listener(client_port);
    std::fprintf(stderr, "node %u listening: client=%u peer=%u\n", id,
                 client_port, peer_port);
    for (;;) {
        auto ch = listener.accept();
        try {
            node.serve_client(*ch);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "client session: %s\n", e.what());
        }
    }
}

struct ClientArgs {
    std::uint32_t team = 0;
    std::string node1, node2, params_path, in;
    std::uint64_t seed = 0;
};

system::TeamClient make_client(const ClientArgs& a) {
    auto params = embedding::EmbeddingParams::load(a.params_path);
    return system::TeamClient(a.team, params, a.seed);
}

int cmd_setup(const ClientArgs& a) {
    auto client = make_client(a);
    auto ingest = dataset::ingest_csv(a.in);
    auto [h1, p1] = parse_endpoint(a.node1);
    auto [h2, p2] = parse_endpoint(a.node2);
    auto c1 = net::TcpChannel::connect(h1, p1);
    auto c2 = net::TcpChannel::connect(h2, p2);
    client.setup(ingest.records, *c1, *c2);
    std::printf("team=%u records=%zu dropped=%llu\n", a.team,
                ingest.records.size(),
                static_cast<unsigned long long>(ingest.dropped));
    return 0;
}

int cmd_query(const ClientArgs& a, const std::string& mode) {
    auto client = make_client(a);
    auto ingest = dataset::ingest_csv(a.in);
    auto [h1, p1] = parse_endpoint(a.node1);
    auto [h2, p2] = parse_endpoint(a.node2);
    auto c1 = net::TcpChannel::connect(h1, p1);
    auto c2 = net::TcpChannel::connect(h2, p2);
    auto m = mode == "online" ? system::QueryMode::online
                              : system::QueryMode::offline;
    std::uint64_t handle = client.query(ingest.records, m, *c1, *c2);
    std::printf("handle=%llu records=%zu\n",
                static_cast<unsigned long long>(handle),
                ingest.records.size());
    return 0;
}

int cmd_process(const ClientArgs& a, std::uint64_t handle) {
    auto client = make_client(a);
    auto [h1, p1] = parse_endpoint(a.node1);
    auto c1 = net::TcpChannel::connect(h1, p1);
    client.trigger_process(handle, *c1);
    std::printf("processed handle=%llu\n",
                static_cast<unsigned long long>(handle));
    return 0;
}

int cmd_retrieve(const ClientArgs& a, std::uint64_t handle) {
    auto client = make_client(a);
    auto [h1, p1] = parse_endpoint(a.node1);
    auto [h2, p2] = parse_endpoint(a.node2);
    auto c1 = net::TcpChannel::connect(h1, p1);
    auto c2 = net::TcpChannel::connect(h2, p2);
    auto res = client.retrieve(handle, *c1, *c2);
    std::printf("duplicates=%zu\n", res.duplicates.size());
    for (const auto& d : res.duplicates)
        std::printf("query=%llu org=%u record=%llu\n",
                    static_cast<unsigned long long>(d.query), d.org,
                    static_cast<unsigned long long>(d.record));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"privacy-preserving cross-organizational deduplication"};
    app.require_subcommand(1);
    app.set_config("--config");

    // gen-data
    std::uint64_t gd_n = 1024, gd_dups = 128, gd_nondups = 0, gd_seed = 1;
    std::string gd_out = "data";
    auto* gen = app.add_subcommand("gen-data", "generate a labeled corpus");
    gen->add_option("--n", gd_n, "reference records");
    gen->add_option("--dups", gd_dups, "duplicate test records");
    gen->add_option("--nondups", gd_nondups, "non-duplicates (default: dups)");
    gen->add_option("--seed", gd_seed);
    gen->add_option("--out", gd_out, "output directory");

    // embed
    std::string em_params, em_in, em_out;
    auto* em = app.add_subcommand("embed", "embed a CSV of records");
    em->add_option("--params", em_params)->required();
    em->add_option("--in", em_in)->required();
    em->add_option("--out", em_out)->required();

    // calibrate
    std::string ca_params, ca_ref, ca_test, ca_save;
    std::uint64_t ca_nref = 16384, ca_ndup = 4096, ca_nnon = 4096, ca_seed = 1;
    double ca_target = 0.001;
    auto* ca = app.add_subcommand("calibrate", "pick tau for a target FPR");
    ca->add_option("--params", ca_params, "base parameter file (optional)");
    ca->add_option("--reference", ca_ref, "reference CSV");
    ca->add_option("--test", ca_test, "labeled test CSV");
    ca->add_option("--n-ref", ca_nref, "generated reference size");
    ca->add_option("--n-dup", ca_ndup);
    ca->add_option("--n-nondup", ca_nnon);
    ca->add_option("--seed", ca_seed);
    ca->add_option("--target-fpr", ca_target);
    ca->add_option("--save-params", ca_save, "write calibrated parameters");

    // node
    std::uint32_t no_id = 1, no_l = 511, no_tau = 132;
    std::uint16_t no_peer = 7401, no_client = 7402;
    std::string no_store, no_peer_ep;
    std::uint64_t no_otseed = 0;
    bool no_group = false;
    auto* no = app.add_subcommand("node", "run a compute node");
    no->add_option("--id", no_id)->check(CLI::Range(1u, 2u))->required();
    no->add_option("--listen-peer", no_peer)->required();
    no->add_option("--listen-client", no_client)->required();
    no->add_option("--store", no_store, "share log directory");
    no->add_option("--l", no_l);
    no->add_option("--tau", no_tau);
    no->add_option("--ot-seed", no_otseed);
    no->add_option("--peer", no_peer_ep, "peer node host:port (node 1 only)");
    no->add_flag("--group-ot", no_group, "use the group OT backend");

    // client ops
    ClientArgs cl;
    std::string q_mode = "offline";
    std::uint64_t cl_handle = 0;
    auto add_client_opts = [&](CLI::App* sub, bool needs_two, bool needs_in) {
        sub->add_option("--team", cl.team)->required();
        sub->add_option("--node1", cl.node1)->required();
        if (needs_two) sub->add_option("--node2", cl.node2)->required();
        sub->add_option("--params", cl.params_path)->required();
        if (needs_in) sub->add_option("--in", cl.in)->required();
        sub->add_option("--seed", cl.seed);
    };
    auto* se = app.add_subcommand("setup", "register a team's records");
    add_client_opts(se, true, true);
    auto* qu = app.add_subcommand("query", "upload a query batch");
    add_client_opts(qu, true, true);
    qu->add_option("--mode", q_mode)
        ->check(CLI::IsMember({"online", "offline"}));
    auto* pr = app.add_subcommand("process", "run a pending query");
    add_client_opts(pr, false, false);
    pr->add_option("--handle", cl_handle)->required();
    auto* re = app.add_subcommand("retrieve", "fetch and decode a result");
    add_client_opts(re, true, false);
    re->add_option("--handle", cl_handle)->required();

    // bench
    auto* be = app.add_subcommand("bench", "local protocol benchmarks");
    std::string bf_protocol = "plain", bf_ot = "dealer", bf_shape = "none";
    std::uint32_t bf_l = 127, bf_tau = 7;
    std::uint64_t bf_nq = 1, bf_nr = 1024, bf_seed = 1;
    unsigned bf_repeat = 1;
    auto* bf = be->add_subcommand("fpsi", "benchmark one protocol instance");
    bf->add_option("--protocol", bf_protocol)
        ->check(CLI::IsMember({"plain", "ss", "ssb"}));
    bf->add_option("--l", bf_l);
    bf->add_option("--tau", bf_tau);
    bf->add_option("--nq", bf_nq);
    bf->add_option("--nr", bf_nr);
    bf->add_option("--ot", bf_ot)->check(CLI::IsMember({"dealer", "group"}));
    bf->add_option("--shape", bf_shape)
        ->check(CLI::IsMember({"gigabit", "slow", "none"}));
    bf->add_option("--seed", bf_seed);
    bf->add_option("--repeat", bf_repeat);
    be->require_subcommand(1);

    // oracle-check
    unsigned oc_instances = 50;
    std::uint32_t oc_maxl = 63;
    std::uint64_t oc_maxn = 8, oc_seed = 1;
    auto* oc = app.add_subcommand("oracle-check",
                                  "cross-check the protocol against "
                                  "brute-force references");
    oc->add_option("--instances", oc_instances);
    oc->add_option("--max-l", oc_maxl);
    oc->add_option("--max-n", oc_maxn);
    oc->add_option("--seed", oc_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen_data(gd_n, gd_dups,
                                gd_nondups ? gd_nondups : gd_dups, gd_seed,
                                gd_out);
        if (em->parsed()) return cmd_embed(em_params, em_in, em_out);
        if (ca->parsed())
            return cmd_calibrate(ca_params, ca_ref, ca_test, ca_nref, ca_ndup,
                                 ca_nnon, ca_seed, ca_target, ca_save);
        if (no->parsed())
            return cmd_node(no_id, no_peer, no_client, no_store, no_l, no_tau,
                            no_otseed, no_peer_ep, no_group);
        if (se->parsed()) return cmd_setup(cl);
        if (qu->parsed()) return cmd_query(cl, q_mode);
        if (pr->parsed()) return cmd_process(cl, cl_handle);
        if (re->parsed()) return cmd_retrieve(cl, cl_handle);
        if (be->parsed())
            return cmd_bench_fpsi(bf_protocol, bf_l, bf_tau, bf_nq, bf_nr,
                                  bf_ot, bf_shape, bf_seed, bf_repeat);
        if (oc->parsed())
            return cmd_oracle_check(oc_instances, oc_maxl, oc_maxn, oc_seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
