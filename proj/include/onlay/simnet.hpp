#pragma once

#include "onlay/node.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace onlay {

class ConfigError : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
};

enum class DelayKind { Lockstep, Random, Reorder, Drop };

struct DelayModel {
   DelayKind     kind{DelayKind::Lockstep};
   std::uint64_t max_delay{0}; // rand:<max>, extra steps beyond the next one
   double        drop_p{0.0};  // drop:<p>

   std::string str() const;
};

/// lockstep | rand:<max> | reorder | drop:<p>
std::optional<DelayModel> parse_delay(std::string_view s);

struct SimConfig {
   std::size_t                n{4};
   std::size_t                k{0}; // 0 means min(3, n)
   std::uint64_t              steps{100};
   std::uint64_t              seed{0};
   std::map<NodeId, Behavior> byzantine;
   double                     w_p{0.0};
   std::size_t                w_c{0};
   DelayModel                 delay;
   Strategy                   strategy{Strategy::Random};
   LayeringAlgo               algo{LayeringAlgo::OLpl};
   std::size_t                cg_width{0};
   std::size_t                tx_per_step{1};
   std::uint32_t              clotho_gap{kClothoGap};
   bool                       record_trace{true};

   std::size_t effective_k() const { return k ? k : std::min<std::size_t>(3, n); }
   Behavior    behavior(NodeId id) const;
   bool        honest(NodeId id) const { return behavior(id) == Behavior::Honest; }
   std::vector<NodeId> honest_nodes() const;

   /// Throws ConfigError.
   void validate() const;

   /// key=value lines, sorted; enough to reproduce the run.
   std::string manifest() const;
};

/// Inverse of SimConfig::manifest; unknown keys are ignored. Throws ConfigError.
SimConfig parse_manifest(std::istream& in);

/// `<id>:<kind>,...` with kind in honest|forker|equivocator|silent. Throws ConfigError.
std::map<NodeId, Behavior> parse_byzantine(std::string_view spec);

/// In-flight messages with per-message delivery steps.
class Transport {
public:
   explicit Transport(const SimConfig& cfg) : cfg_(cfg) {}

   void send(std::vector<Envelope> out, std::uint64_t step, bool reliable);

   /// Messages for `dst` due at or before `step`, in delivery order.
   std::vector<Envelope> take(NodeId dst, std::uint64_t step);

   bool          empty() const { return in_flight_.empty(); }
   std::uint64_t sent() const { return sent_; }
   std::uint64_t dropped() const { return dropped_; }
   std::uint64_t delivered() const { return delivered_; }

private:
   struct Item {
      std::uint64_t deliver_at;
      std::uint64_t seq;
      Envelope      env;
   };

   const SimConfig&  cfg_;
   std::vector<Item> in_flight_;
   std::uint64_t     seq_{0};
   std::uint64_t     sent_{0};
   std::uint64_t     dropped_{0};
   std::uint64_t     delivered_{0};
};

struct RunResult {
   SimConfig                config;
   std::vector<Node>        nodes;
   std::vector<std::string> trace;
   std::uint64_t            steps_run{0};   // including the drain phase
   std::uint64_t            drain_rounds{0};
   std::uint64_t            messages_sent{0};
   std::uint64_t            messages_dropped{0};

   /// Per node, the final order length reached by the end of the active phase.
   std::vector<std::size_t> order_before_drain;
};

/// Deterministic function of the config. After `steps` scheduler steps a drain
/// phase stops event creation and drops, then runs full mutual syncs until
/// nothing new arrives.
RunResult run(const SimConfig& cfg);

/// `step=<int> <kind> src=<id> dst=<id> payload=<summary>`
std::string trace_line(std::uint64_t step, const Envelope& env);

} // namespace onlay
