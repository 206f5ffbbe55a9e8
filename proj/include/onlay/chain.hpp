#pragma once

#include "onlay/event.hpp"

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace onlay {

enum class ChainErrc {
   MissingRef,
   DuplicateEvent,
   InvalidLamport,
   RefShapeViolation,
   UnknownEvent,
};

const char* to_string(ChainErrc code);

class ChainError : public std::runtime_error {
public:
   ChainError(ChainErrc code, const EventId& event, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), event_(event) {}

   ChainErrc      code() const { return code_; }
   const EventId& event() const { return event_; } // offending (or missing) event

private:
   ChainErrc code_;
   EventId   event_;
};

/// Number of events known per creator.
using KnownMap = std::map<NodeId, std::uint64_t>;

/// A node's local DAG of event blocks. Append-only: events are stored in
/// insertion order, which is always a topological order (refs precede
/// referers), and addressed internally by that index. Every event keeps a
/// bitset of its ancestors so happened-before is a constant-time lookup.
class OperaChain {
public:
   using Index = std::uint32_t;

   /// Validates and appends `e`; returns its index. Throws ChainError.
   Index insert(EventBlock e);

   std::size_t size() const { return events_.size(); }
   bool        empty() const { return events_.empty(); }

   bool                 contains(const EventId& id) const { return index_.contains(id); }
   std::optional<Index> find(const EventId& id) const;
   Index                index_of(const EventId& id) const; // throws UnknownEvent

   const EventBlock& event(Index i) const { return events_[i]; }
   const EventBlock& at(const EventId& id) const { return events_[index_of(id)]; }
   const std::vector<EventBlock>& events() const { return events_; }

   /// Parent indices, self parent first.
   std::span<const Index> parents(Index i) const { return parents_[i]; }
   std::optional<Index>   self_parent(Index i) const;

   /// x happened-before y: x is a strict ancestor of y.
   bool happened_before(Index x, Index y) const;
   bool happened_before(const EventId& x, const EventId& y) const;
   bool ancestor_or_self(Index x, Index y) const { return x == y || happened_before(x, y); }
   bool concurrent(Index x, Index y) const;
   bool concurrent(const EventId& x, const EventId& y) const;

   /// x is a strict self-ancestor of y (reachable through self refs only).
   bool self_ancestor(Index x, Index y) const;

   /// v and all its ancestors, ascending by index.
   std::vector<Index>   subgraph_under(Index v) const;
   std::vector<EventId> subgraph_under(const EventId& v) const;

   /// Same-creator events that are neither self-ancestor nor self-descendant of `i`.
   std::vector<Index> fork_partners(Index i) const;

   /// All fork pairs (x, y) with x.id < y.id.
   std::vector<std::pair<EventId, EventId>> detect_forks() const;

   /// Events of `creator`, sorted by (seq, lamport, id).
   std::span<const Index> by_creator(NodeId creator) const;
   std::vector<NodeId>    creators() const;

   /// Highest-seq event of the creator (ties: lowest (lamport, id)).
   std::optional<Index> top(NodeId creator) const;

   KnownMap known() const;

   /// Local events the remote side does not know, by per-creator seq, in
   /// (lamport, id) order, which is causal.
   std::vector<EventBlock> diff_events(const KnownMap& remote) const;

private:
   std::vector<EventBlock>                 events_;
   std::unordered_map<EventId, Index>      index_;
   std::vector<std::vector<Index>>         parents_;
   std::vector<std::vector<std::uint64_t>> ancestors_;
   std::map<NodeId, std::vector<Index>>    by_creator_;
};

} // namespace onlay
