#pragma once

#include "onlay/ids.hpp"

#include <optional>
#include <string>
#include <vector>

namespace onlay {

/// A container of batched transactions created by one node. The self reference
/// points at the creator's previous event; peer references point at top events
/// of other creators. Authenticity of `creator` is a harness guarantee (no
/// signatures are carried).
struct EventBlock {
   EventId                id;
   NodeId                 creator;
   std::optional<EventId> self_ref; // empty for the leaf
   std::vector<EventId>   other_refs; // sorted ascending by id bytes
   std::uint64_t          lamport{0};
   Bytes                  payload;
   std::uint64_t          seq{0}; // per-creator creation sequence, leaf = 0

   bool is_leaf() const { return !self_ref.has_value(); }

   /// Self reference (if any) followed by the peer references.
   std::vector<EventId> refs() const;

   /// `creator:seq`, the human label used by DOT and CLI output.
   std::string label() const;

   bool operator==(const EventBlock&) const = default;
};

/// Fixed-order byte encoding that the id is the digest of:
/// creator, self_ref, sorted other_refs, lamport, sha256(payload), seq.
Bytes canonical_encoding(const EventBlock& e);

EventId compute_event_id(const EventBlock& e);

/// Builds an event with its refs sorted and its id filled in. The lamport
/// value is taken as given; OperaChain::insert validates it.
EventBlock make_event(NodeId creator, std::optional<EventId> self_ref, std::vector<EventId> other_refs,
                      std::uint64_t lamport, Bytes payload, std::uint64_t seq);

/// Ordering key used everywhere a canonical tie-break is needed.
struct LamportKey {
   std::uint64_t lamport{0};
   EventId       id;

   auto operator<=>(const LamportKey&) const = default;
};

inline LamportKey lamport_key(const EventBlock& e) { return {e.lamport, e.id}; }

} // namespace onlay
