#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "xdup/core/rng.hpp"
#include "xdup/embedding/embedding.hpp"
#include "xdup/fpsi/ss.hpp"
#include "xdup/net/channel.hpp"

namespace xdup::system {

class SystemError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kSystemVersion = 1;
inline constexpr const char* kClientProto = "XDUP-CLIENT";
inline constexpr const char* kPeerProto = "XDUP-PEER";

enum class QueryMode : std::uint8_t { online = 0, offline = 1 };

// which secret-shared variant carries a query; automatic picks the batched
// one for multi-element queries and the unbatched one otherwise
enum class SsVariant : std::uint8_t { automatic = 0, unbatched = 1, batched = 2 };

inline constexpr std::uint64_t kMaxOfflineQuery = 2048;

// per-team record counts at query time, ascending team id, querier's own
// entry forced to zero
struct LengthEntry {
    std::uint32_t team = 0;
    std::uint64_t count = 0;

    bool operator==(const LengthEntry&) const = default;
};
using LengthVector = std::vector<LengthEntry>;

struct Duplicate {
    std::uint64_t query = 0;   // 0-based index into the query batch
    std::uint32_t org = 0;     // owning team id
    std::uint64_t record = 0;  // 0-based index into that team's database

    bool operator==(const Duplicate&) const = default;
};

struct QueryResult {
    fpsi::MatchMatrix matches;
    LengthVector lengths;
    std::vector<Duplicate> duplicates;
};

// Maps each set column of the match matrix back to (org, record) through the
// cumulative sums of the length vector.
std::vector<Duplicate> decode_duplicates(const fpsi::MatchMatrix& matches,
                                         const LengthVector& lengths);

struct NodeConfig {
    std::uint32_t share_id = 1;  // 1 or 2
    std::uint32_t l = 511;
    std::uint32_t tau = 132;
    std::string store_dir;      // empty: volatile in-memory state
    std::uint64_t ot_seed = 0;  // dealer seed, identical at both nodes
    bool use_group_ot = false;
    std::uint64_t result_ttl_ms = 60 * 60 * 1000;
};

// One compute node. Holds every team's share database, accepts client
// operations (setup upload, query upload, processing trigger, retrieval) and
// runs the secret-shared matching against its peer node.
class NodeService {
  public:
    NodeService(NodeConfig config, std::uint64_t rng_seed);

    // serves exactly one client operation on the channel
    void serve_client(net::Channel& ch);

    // node 2 side of one processing run initiated by node 1
    void serve_peer(net::Channel& ch);

    // node 1 side: run the pending query `handle` against the peer node
    void process(std::uint64_t handle, net::Channel& peer);

    // state inspection for audits and tests
    std::vector<std::uint32_t> teams() const;
    std::uint64_t team_size(std::uint32_t team) const;
    std::vector<BitString> team_shares(std::uint32_t team) const;
    bool has_result(std::uint64_t handle) const;
    bool has_pending(std::uint64_t handle) const;
    const NodeConfig& config() const { return config_; }

    // how node 1 reaches node 2's peer link when a client asks it to process
    void set_peer_dialer(
        std::function<std::unique_ptr<net::Channel>()> dialer) {
        peer_dialer_ = std::move(dialer);
    }

  private:
    struct PendingQuery {
        std::uint32_t team = 0;
        std::uint8_t variant = 0;  // resolved SsVariant, never automatic
        std::vector<BitString> shares;
        bool failed = false;
    };
    struct StoredResult {
        fpsi::SharedMatchMatrix share;
        LengthVector lengths;
        std::chrono::steady_clock::time_point stored_at;
    };

    void handle_setup(net::Channel& ch, std::uint32_t team, std::uint64_t count);
    void handle_query(net::Channel& ch, std::uint32_t team, std::uint64_t handle,
                      std::uint64_t count, std::uint8_t mode, std::uint8_t variant);
    void handle_retrieve(net::Channel& ch, std::uint64_t handle);
    std::vector<BitString> recv_shares(net::Channel& ch, std::uint64_t count);
    void append_team(std::uint32_t team, const std::vector<BitString>& shares);
    void log_append(std::uint32_t team, std::uint32_t index,
                    const BitString& share);
    void replay_log();
    void purge_expired();

    // responder-side view for one run: concatenation of all teams except the
    // querier, plus the matching length vector
    std::pair<std::vector<BitString>, LengthVector> other_teams(
        std::uint32_t team) const;

    NodeConfig config_;
    Rng rng_;
    std::map<std::uint32_t, std::vector<BitString>> db_;  // team id -> shares
    std::map<std::uint64_t, PendingQuery> pending_;
    std::map<std::uint64_t, StoredResult> results_;
    std::function<std::unique_ptr<net::Channel>()> peer_dialer_;
    mutable std::mutex mu_;
    std::mutex process_mu_;  // serializes runs that touch the databases
};

// Field-team client. Embeds records, splits embeddings into XOR shares, and
// talks to both nodes' client links. Keeps its own plaintext embeddings for
// the local pre-deduplication pass.
class TeamClient {
  public:
    TeamClient(std::uint32_t team, embedding::EmbeddingParams params,
               std::uint64_t seed);

    void setup(const std::vector<embedding::Record>& records,
               net::Channel& node1, net::Channel& node2);

    // uploads query shares to both nodes; returns the query handle
    std::uint64_t query(const std::vector<embedding::Record>& q, QueryMode mode,
                        net::Channel& node1, net::Channel& node2,
                        SsVariant variant = SsVariant::automatic);

    // asks node 1 to run the pending query against node 2
    void trigger_process(std::uint64_t handle, net::Channel& node1);

    QueryResult retrieve(std::uint64_t handle, net::Channel& node1,
                         net::Channel& node2);

    // indices of query records within tau of the team's own stored records
    std::vector<std::uint64_t> local_duplicates(
        const std::vector<embedding::Record>& q) const;

    std::uint32_t team() const { return team_; }
    const std::vector<BitString>& own_embeddings() const { return own_; }

  private:
    void upload(net::Channel& ch, std::uint8_t op, std::uint64_t handle,
                std::uint8_t mode, std::uint8_t variant,
                const std::vector<BitString>& shares);

    std::uint32_t team_;
    embedding::EmbeddingParams params_;
    Rng rng_;
    std::vector<BitString> own_;
};

}  // namespace xdup::system
