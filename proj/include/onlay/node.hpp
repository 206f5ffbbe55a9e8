#pragma once

#include "onlay/chain.hpp"
#include "onlay/finality.hpp"
#include "onlay/layering.hpp"
#include "onlay/rng.hpp"
#include "onlay/root_frame.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace onlay {

enum class NodeErrc {
   NotEnoughPeers,
   UnknownTransaction,
   IncompleteCoverage,
};

const char* to_string(NodeErrc code);

class NodeError : public std::runtime_error {
public:
   NodeError(NodeErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
   NodeErrc code() const { return code_; }

private:
   NodeErrc code_;
};

enum class Behavior { Honest, Forker, Equivocator, Silent };
enum class Strategy { Random, LeastUsed, MostUsed, Fair, Smart };
enum class LayeringAlgo { OLpl, OCg };

const char* to_string(Behavior b);
const char* to_string(Strategy s);
std::optional<Behavior> parse_behavior(std::string_view s);
std::optional<Strategy> parse_strategy(std::string_view s);

struct NodeConfig {
   NodeId        id;
   std::size_t   n{4};
   std::size_t   k{3};
   Strategy      strategy{Strategy::Random};
   std::uint64_t seed{0};
   Behavior      behavior{Behavior::Honest};
   double        w_p{0.0};
   std::size_t   w_c{0};
   LayeringAlgo  algo{LayeringAlgo::OLpl};
   std::size_t   cg_width{0}; // O-CG overlay width; 0 means ceil(W_max)
   std::uint32_t clotho_gap{kClothoGap};
};

// Wire messages. A SyncRequest also names refs the requester is missing.
struct SyncRequest {
   KnownMap             known;
   std::vector<EventId> wanted;
};
struct SyncResponse {
   std::vector<EventBlock> events;
};
struct Broadcast {
   EventBlock event;
};
struct ForkNotice {
   EventBlock first;
   EventBlock second;
};
using MessageBody = std::variant<SyncRequest, SyncResponse, Broadcast, ForkNotice>;

struct Envelope {
   NodeId      src;
   NodeId      dst;
   MessageBody body;
};

const char* kind_name(const MessageBody& body);
std::string summary(const MessageBody& body);

enum class Stage { Submitted, Batched, RootConfirmed, ClothoConfirmed, Finalized };
const char* to_string(Stage s);

struct ConfirmationStage {
   Stage                        stage{Stage::Submitted};
   std::optional<std::uint64_t> position;
};

struct IngestReport {
   std::size_t                               inserted{0};
   std::size_t                               duplicates{0};
   std::size_t                               buffered{0};
   std::vector<std::pair<EventId, EventId>>  forks;
   std::vector<std::string>                  errors;
};

struct PeerStats {
   std::uint64_t syncs{0};
   std::uint64_t received{0};
};

struct GlobalState {
   std::vector<Index> events;  // ancestor-closed result, ascending
   std::vector<Index> removed; // literal removals, in removal order
};

struct PipelineCheck {
   bool        layering{true};
   bool        roots{true};
   bool        root_frames{true};
   bool        clothos{true};
   bool        order{true};
   std::string detail;

   bool ok() const { return layering && roots && root_frames && clothos && order; }
};

/// One participant: local OPERA chain plus the incremental consensus pipeline
/// (O-LPL layering, root graph, frames, Clotho/Atropos, final order).
class Node {
public:
   explicit Node(NodeConfig cfg);

   const NodeConfig& config() const { return cfg_; }
   NodeId            id() const { return cfg_.id; }

   /// Ingest the inbox, answer sync requests, then (if `create`) run one loop-1
   /// iteration. With `sync_all`, request everything from every peer instead.
   std::vector<Envelope> step(std::uint64_t step_no, std::vector<Envelope> inbox, bool create,
                              bool sync_all = false);

   std::vector<NodeId>     select_peers(std::size_t count, std::uint64_t step_no);
   EventBlock              create_event(const std::vector<EventId>& peer_tops, Bytes payload);
   std::vector<EventBlock> handle_sync_request(const SyncRequest& req) const;
   IngestReport            ingest_events(std::vector<EventBlock> events);
   void                    run_pipeline();

   GlobalState estimate_global_state() const;

   std::uint64_t     submit_transaction(std::uint64_t step_no);
   ConfirmationStage confirmation_stage(std::uint64_t tx) const;
   std::size_t       stage_regressions() const { return regressions_; }
   const std::map<std::uint64_t, ConfirmationStage>& transactions() const { return txs_; }
   std::uint64_t tx_submitted_step(std::uint64_t tx) const { return tx_step_.at(tx); }

   const OperaChain&       chain() const { return chain_; }
   const Layering&         layering() const { return lstate_.layering; }
   const Layering&         cg_layering() const { return cg_state_.layering; }
   const RootGraphBuilder& roots() const { return roots_; }
   const FinalityEngine&   finality() const { return finality_; }
   const FinalOrder&       final_order() const { return finality_.order(); }
   std::size_t             pending_count() const { return pending_.size(); }
   bool                    quarantined(Index i) const { return i < quarantined_.size() && quarantined_[i]; }
   bool                    tainted(Index i) const { return i < tainted_.size() && tainted_[i]; }
   std::vector<Index>      reported_roots() const; // V_R without quarantined/tainted events
   const std::map<NodeId, PeerStats>& peer_stats() const { return stats_; }
   std::optional<Index>    own_tip() const { return own_tip_; }

   /// Recomputes the whole pipeline from the chain and compares.
   PipelineCheck check_against_batch() const;

private:
   void                 on_inserted(Index i, IngestReport& report);
   void                 quarantine(Index i);
   std::optional<Index> untainted_top(NodeId creator) const;
   std::vector<EventId> wanted() const;
   Bytes                take_payload();
   void                 set_stage(std::uint64_t tx, Stage s, std::optional<std::uint64_t> pos = std::nullopt);
   void                 update_transactions(Index fresh_from, std::size_t clothos_before);

   NodeConfig cfg_;
   OperaChain chain_;

   LayeringState    lstate_;
   LayeringState    cg_state_;
   RootGraphBuilder roots_;
   FinalityEngine   finality_;
   Index            pipeline_done_{0};

   std::map<LamportKey, EventBlock>    pending_;
   std::vector<bool>                   quarantined_;
   std::vector<bool>                   tainted_;
   std::set<std::pair<EventId, EventId>> known_forks_;
   std::vector<ForkNotice>             notices_;

   std::optional<Index>        own_tip_;
   std::map<NodeId, PeerStats> stats_;

   std::uint64_t                              next_tx_{0};
   std::vector<std::uint64_t>                 mempool_;
   std::map<std::uint64_t, ConfirmationStage> txs_;
   std::map<std::uint64_t, std::uint64_t>     tx_step_;
   std::map<std::uint64_t, Index>             tx_event_;
   std::set<std::uint64_t>                    open_txs_;
   std::size_t                                regressions_{0};
};

} // namespace onlay
