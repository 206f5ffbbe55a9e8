#include "onlay/chain.hpp"

#include <algorithm>
#include <set>

namespace onlay {

const char* to_string(ChainErrc code) {
   switch (code) {
   case ChainErrc::MissingRef: return "MissingRef";
   case ChainErrc::DuplicateEvent: return "DuplicateEvent";
   case ChainErrc::InvalidLamport: return "InvalidLamport";
   case ChainErrc::RefShapeViolation: return "RefShapeViolation";
   case ChainErrc::UnknownEvent: return "UnknownEvent";
   }
   return "?";
}

namespace {
bool test_bit(const std::vector<std::uint64_t>& bits, std::size_t i) {
   std::size_t w = i / 64;
   return w < bits.size() && ((bits[w] >> (i % 64)) & 1u);
}

void set_bit(std::vector<std::uint64_t>& bits, std::size_t i) { bits[i / 64] |= std::uint64_t{1} << (i % 64); }
} // namespace

OperaChain::Index OperaChain::insert(EventBlock e) {
   if (contains(e.id))
      throw ChainError(ChainErrc::DuplicateEvent, e.id, "event " + e.id.short_hex() + " already present");

   if (e.is_leaf() != (e.seq == 0))
      throw ChainError(ChainErrc::RefShapeViolation, e.id, "leaf iff seq 0 and no self ref");
   if (e.is_leaf() && !e.other_refs.empty())
      throw ChainError(ChainErrc::RefShapeViolation, e.id, "leaf carries peer refs");

   std::vector<Index> parents;
   parents.reserve(e.other_refs.size() + 1);
   std::uint64_t max_lamport = 0;
   for (const auto& r : e.refs()) {
      auto p = find(r);
      if (!p)
         throw ChainError(ChainErrc::MissingRef, r, "ref " + r.short_hex() + " of " + e.id.short_hex() + " absent");
      parents.push_back(*p);
      max_lamport = std::max(max_lamport, events_[*p].lamport);
   }

   if (e.self_ref) {
      const auto& sp = events_[parents.front()];
      if (sp.creator != e.creator || sp.seq + 1 != e.seq)
         throw ChainError(ChainErrc::RefShapeViolation, e.id, "self ref must be the creator's previous event");
   }
   std::set<NodeId> peer_creators;
   for (std::size_t i = e.self_ref ? 1 : 0; i < parents.size(); ++i) {
      NodeId c = events_[parents[i]].creator;
      if (c == e.creator || !peer_creators.insert(c).second)
         throw ChainError(ChainErrc::RefShapeViolation, e.id, "at most one ref per distinct peer creator");
   }

   std::uint64_t expected = e.is_leaf() ? 0 : max_lamport + 1;
   if (e.lamport != expected)
      throw ChainError(ChainErrc::InvalidLamport, e.id,
                       "claimed " + std::to_string(e.lamport) + ", computed " + std::to_string(expected));

   auto idx = static_cast<Index>(events_.size());
   std::vector<std::uint64_t> anc((idx + 63) / 64, 0);
   for (Index p : parents) {
      const auto& pa = ancestors_[p];
      for (std::size_t w = 0; w < pa.size(); ++w)
         anc[w] |= pa[w];
      set_bit(anc, p);
   }

   index_.emplace(e.id, idx);
   auto& list = by_creator_[e.creator];
   auto  key  = std::make_tuple(e.seq, e.lamport, e.id);
   auto  pos  = std::upper_bound(list.begin(), list.end(), key, [this](const auto& k, Index j) {
      const auto& o = events_[j];
      return k < std::make_tuple(o.seq, o.lamport, o.id);
   });
   list.insert(pos, idx);
   events_.push_back(std::move(e));
   parents_.push_back(std::move(parents));
   ancestors_.push_back(std::move(anc));
   return idx;
}

std::optional<OperaChain::Index> OperaChain::find(const EventId& id) const {
   auto it = index_.find(id);
   if (it == index_.end())
      return std::nullopt;
   return it->second;
}

OperaChain::Index OperaChain::index_of(const EventId& id) const {
   auto i = find(id);
   if (!i)
      throw ChainError(ChainErrc::UnknownEvent, id, "event " + id.short_hex() + " not in chain");
   return *i;
}

std::optional<OperaChain::Index> OperaChain::self_parent(Index i) const {
   if (events_[i].is_leaf())
      return std::nullopt;
   return parents_[i].front();
}

bool OperaChain::happened_before(Index x, Index y) const { return x < y && test_bit(ancestors_[y], x); }

bool OperaChain::happened_before(const EventId& x, const EventId& y) const {
   return happened_before(index_of(x), index_of(y));
}

bool OperaChain::concurrent(Index x, Index y) const {
   return x != y && !happened_before(x, y) && !happened_before(y, x);
}

bool OperaChain::concurrent(const EventId& x, const EventId& y) const { return concurrent(index_of(x), index_of(y)); }

bool OperaChain::self_ancestor(Index x, Index y) const {
   const auto& ex = events_[x];
   if (ex.creator != events_[y].creator || x == y)
      return false;
   std::optional<Index> cur = self_parent(y);
   while (cur && events_[*cur].seq > ex.seq)
      cur = self_parent(*cur);
   return cur && *cur == x;
}

std::vector<OperaChain::Index> OperaChain::subgraph_under(Index v) const {
   std::vector<Index> out;
   const auto&        anc = ancestors_[v];
   for (std::size_t w = 0; w < anc.size(); ++w) {
      auto bits = anc[w];
      while (bits) {
         int b = __builtin_ctzll(bits);
         out.push_back(static_cast<Index>(w * 64 + b));
         bits &= bits - 1;
      }
   }
   out.push_back(v);
   return out;
}

std::vector<EventId> OperaChain::subgraph_under(const EventId& v) const {
   std::vector<EventId> out;
   for (Index i : subgraph_under(index_of(v)))
      out.push_back(events_[i].id);
   return out;
}

std::vector<OperaChain::Index> OperaChain::fork_partners(Index i) const {
   std::vector<Index> out;
   const auto&        e    = events_[i];
   auto               list = by_creator(e.creator);
   // Fast path: a linear self chain has exactly one event per seq.
   bool linear = true;
   for (std::size_t j = 1; j < list.size(); ++j)
      if (events_[list[j]].seq == events_[list[j - 1]].seq) {
         linear = false;
         break;
      }
   if (linear)
      return out;
   for (Index j : list)
      if (j != i && !self_ancestor(j, i) && !self_ancestor(i, j))
         out.push_back(j);
   return out;
}

std::vector<std::pair<EventId, EventId>> OperaChain::detect_forks() const {
   std::vector<std::pair<EventId, EventId>> out;
   for (const auto& [creator, list] : by_creator_) {
      bool linear = true;
      for (std::size_t j = 1; j < list.size(); ++j)
         if (events_[list[j]].seq == events_[list[j - 1]].seq)
            linear = false;
      if (linear)
         continue;
      // Self-chain paths indexed by seq make each pair test O(1).
      std::vector<std::vector<Index>> path(events_.size());
      for (Index i : list) {
         auto sp = self_parent(i);
         if (sp)
            path[i] = path[*sp];
         path[i].push_back(i);
      }
      for (std::size_t a = 0; a < list.size(); ++a)
         for (std::size_t b = a + 1; b < list.size(); ++b) {
            Index x = list[a], y = list[b]; // seq(x) <= seq(y)
            if (path[y][events_[x].seq] == x)
               continue;
            auto p = std::minmax(events_[x].id, events_[y].id);
            out.emplace_back(p.first, p.second);
         }
   }
   std::sort(out.begin(), out.end());
   return out;
}

std::span<const OperaChain::Index> OperaChain::by_creator(NodeId creator) const {
   auto it = by_creator_.find(creator);
   if (it == by_creator_.end())
      return {};
   return it->second;
}

std::vector<NodeId> OperaChain::creators() const {
   std::vector<NodeId> out;
   for (const auto& [c, _] : by_creator_)
      out.push_back(c);
   return out;
}

std::optional<OperaChain::Index> OperaChain::top(NodeId creator) const {
   auto list = by_creator(creator);
   if (list.empty())
      return std::nullopt;
   auto max_seq = events_[list.back()].seq;
   auto it      = std::find_if(list.begin(), list.end(), [&](Index i) { return events_[i].seq == max_seq; });
   return *it;
}

KnownMap OperaChain::known() const {
   KnownMap out;
   for (const auto& [c, list] : by_creator_)
      out[c] = list.size();
   return out;
}

std::vector<EventBlock> OperaChain::diff_events(const KnownMap& remote) const {
   std::vector<Index> picked;
   for (const auto& [c, list] : by_creator_) {
      auto it        = remote.find(c);
      std::uint64_t count = it == remote.end() ? 0 : it->second;
      auto from = std::lower_bound(list.begin(), list.end(), count,
                                   [this](Index i, std::uint64_t s) { return events_[i].seq < s; });
      picked.insert(picked.end(), from, list.end());
   }
   std::sort(picked.begin(), picked.end(),
             [this](Index a, Index b) { return lamport_key(events_[a]) < lamport_key(events_[b]); });
   std::vector<EventBlock> out;
   out.reserve(picked.size());
   for (Index i : picked)
      out.push_back(events_[i]);
   return out;
}

} // namespace onlay
