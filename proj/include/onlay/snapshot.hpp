#pragma once

#include "onlay/node.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace onlay {

struct VertexRecord {
   std::uint32_t layer{0};
   std::uint32_t frame{0}; // seen frame
   std::uint32_t root{0};  // root frame, 0 for non-roots
   bool operator==(const VertexRecord&) const = default;
};

struct ClothoLine {
   EventId       root;
   std::uint32_t frame{0};
   EventId       nominator;
   bool operator==(const ClothoLine&) const = default;
};

/// A node's persisted state: the DAG in insertion order, then a `stage`
/// section with per-vertex layer/frame records and the finality output.
struct Snapshot {
   NodeId                                        node;
   Behavior                                      behavior{Behavior::Honest};
   std::vector<EventBlock>                       events;
   std::map<EventId, VertexRecord>               vertices;
   std::vector<ClothoLine>                       clothos;
   std::vector<std::pair<EventId, std::uint64_t>> atropos; // (event, position)
   std::vector<EventId>                          order;
   std::vector<EventId>                          quarantine;

   /// Filled by parse_snapshot: id/hash mismatches and chain validity failures.
   std::vector<std::string> integrity;
};

Snapshot    take_snapshot(const Node& node);
std::string format_snapshot(const Snapshot& snap);

/// Lenient: ids are not recomputed on load, so tampered records survive into
/// `events` and are listed in `integrity`. Throws ParseError on malformed lines.
Snapshot parse_snapshot(std::istream& in);

/// Rebuilds the chain from the records; throws ChainError on invalid input.
OperaChain chain_of(const Snapshot& snap);

} // namespace onlay
