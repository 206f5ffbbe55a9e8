#pragma once

#include "onlay/simnet.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace onlay {

class InvalidCut : public std::invalid_argument {
public:
   using std::invalid_argument::invalid_argument;
};

/// One per inconsistent pair of views: the lowest (lamport, id) event whose own
/// record differs between the views (or whose ref is absent from one of them),
/// and how many common events end up with differing subgraphs G[v].
struct ChainViolation {
   std::size_t a{0};
   std::size_t b{0};
   EventId     event;
   std::string reason;
   std::size_t affected{0};
};

/// Empty iff every event present in two views has the same G[v] in both.
std::vector<ChainViolation> check_consistent_chains(const std::vector<std::vector<EventBlock>>& views);

/// The union of the first cut[i] events of each view is closed under refs.
/// Throws InvalidCut when cut does not match the views.
bool check_consistent_cut(const std::vector<std::vector<EventBlock>>& views, const std::vector<std::size_t>& cut);

/// `events` (indices into `chain`) contain every ancestor of each member.
bool is_ancestor_closed(const OperaChain& chain, const std::vector<Index>& events);

/// The estimate laid out as one history prefix per creator and checked with
/// check_consistent_cut. False if it is not such a prefix set or not closed.
bool global_state_is_cut(const OperaChain& chain, const GlobalState& gs);

struct EquivalenceReport {
   bool                   equal{true};
   std::size_t            lpl_width{0};
   std::size_t            cg_width{0};
   std::optional<EventId> counterexample; // first vertex (chain order) whose layers differ
   std::uint32_t          lpl_layer{0};
   std::uint32_t          cg_layer{0};
};

/// layer_lpl versus layer_cg(transitive_reduce(G), W), vertex-wise.
EquivalenceReport check_equivalence(const OperaChain& chain, std::size_t W);

struct CheckResult {
   std::string name;
   bool        ok{true};
   std::string detail;
};

CheckResult check_chains(const RunResult& r);
CheckResult check_root_frame_agreement(const RunResult& r);
CheckResult check_order_agreement(const RunResult& r);
CheckResult check_fork_exclusion(const RunResult& r);
CheckResult check_incremental_batch(const RunResult& r);
CheckResult check_buffers_empty(const RunResult& r);
CheckResult check_global_state(const RunResult& r);
CheckResult check_theorems(const RunResult& r);

struct TxStats {
   std::size_t submitted{0};
   std::size_t finalized{0};
   std::size_t regressions{0};
   double      ratio() const { return submitted ? double(finalized) / double(submitted) : 1.0; }
};

/// Honest nodes' transactions submitted before `before_step`.
TxStats tx_stats(const RunResult& r, std::uint64_t before_step);

/// All checks above plus the transaction ratio on the first third of steps.
std::vector<CheckResult> check_run(const RunResult& r);

/// Sorted key=value lines: config, per-node metrics and check outcomes.
std::string format_report(const RunResult& r, const std::vector<CheckResult>& checks);

} // namespace onlay
