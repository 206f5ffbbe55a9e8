#pragma once

// Fixture builders and brute-force oracles shared by the test binaries. The
// oracles work on EventIds and plain maps so they share no code with the
// index-based library algorithms they check.

#include "onlay/chain.hpp"
#include "onlay/rng.hpp"

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace onlay::test {

/// Chain built from named events; lamport and seq are derived.
struct Fixture {
   OperaChain                     chain;
   std::map<std::string, EventId> ids;

   const EventId& operator[](const std::string& name) const { return ids.at(name); }
   OperaChain::Index idx(const std::string& name) const { return chain.index_of(ids.at(name)); }

   EventId add(const std::string& name, std::uint32_t creator, const std::string& self = "",
               const std::vector<std::string>& others = {}, Bytes payload = {}) {
      std::optional<EventId> sp;
      std::uint64_t          lamport = 0, seq = 0;
      std::vector<EventId>   refs;
      if (!self.empty()) {
         sp      = ids.at(self);
         seq     = chain.at(*sp).seq + 1;
         lamport = chain.at(*sp).lamport + 1;
      }
      for (const auto& o : others) {
         refs.push_back(ids.at(o));
         lamport = std::max(lamport, chain.at(ids.at(o)).lamport + 1);
      }
      auto e = make_event(NodeId{creator}, sp, refs, lamport, std::move(payload), seq);
      chain.insert(e);
      ids[name] = e.id;
      return e.id;
   }
};

inline std::string rr_name(std::uint32_t c, std::size_t round) {
   return std::string(1, static_cast<char>('a' + c)) + std::to_string(round);
}

/// Round-robin rounds: in round r creator c adds rr_name(c, r), referencing its
/// own top and the current top of every creator o with sees(c, o).
inline void round_robin(Fixture& f, std::uint32_t n, std::size_t rounds,
                        const std::function<bool(std::uint32_t, std::uint32_t)>& sees = {}) {
   for (std::size_t r = 0; r < rounds; ++r)
      for (std::uint32_t c = 0; c < n; ++c) {
         if (r == 0) {
            f.add(rr_name(c, 0), c);
            continue;
         }
         std::vector<std::string> others;
         for (std::uint32_t o = 0; o < n; ++o) {
            if (o == c || (sees && !sees(c, o)))
               continue;
            others.push_back(rr_name(o, o < c ? r : r - 1));
         }
         f.add(rr_name(c, r), c, rr_name(c, r - 1), others);
      }
}

struct GenParams {
   std::size_t n{4};
   std::size_t events{40};
   std::size_t k{3};
   double      fork_rate{0.0}; // chance that a non-leaf reuses an older self parent
   bool        tops_only{false};
};

/// Random valid chain: each new event picks a creator, its latest event as
/// self parent and up to k-1 events of other creators (any, or only tops).
inline std::vector<EventBlock> random_chain(Rng& rng, const GenParams& p) {
   std::vector<EventBlock>                    out;
   std::map<std::uint32_t, std::vector<std::size_t>> mine;
   for (std::size_t t = 0; t < p.events; ++t) {
      auto                   c = static_cast<std::uint32_t>(rng.below(p.n));
      std::optional<EventId> sp;
      std::uint64_t          lamport = 0, seq = 0;
      auto&                  own     = mine[c];
      if (!own.empty()) {
         std::size_t pick = own.back();
         if (p.fork_rate > 0 && own.size() > 1 && rng.chance(p.fork_rate))
            pick = own[rng.below(own.size() - 1)];
         sp      = out[pick].id;
         seq     = out[pick].seq + 1;
         lamport = out[pick].lamport + 1;
      }
      std::vector<EventId> refs;
      if (sp) {
         std::vector<std::uint32_t> peers;
         for (std::uint32_t o = 0; o < p.n; ++o)
            if (o != c && !mine[o].empty())
               peers.push_back(o);
         for (std::size_t j = 0; j < p.k - 1 && !peers.empty(); ++j) {
            auto pos = rng.below(peers.size());
            auto o   = peers[pos];
            peers.erase(peers.begin() + static_cast<std::ptrdiff_t>(pos));
            const auto& theirs = mine[o];
            std::size_t pick   = p.tops_only ? theirs.back() : theirs[rng.below(theirs.size())];
            refs.push_back(out[pick].id);
            lamport = std::max(lamport, out[pick].lamport + 1);
         }
      }
      out.push_back(make_event(NodeId{c}, sp, refs, lamport, {static_cast<std::uint8_t>(t & 0xff)}, seq));
      own.push_back(out.size() - 1);
   }
   return out;
}

inline OperaChain to_chain(const std::vector<EventBlock>& events) {
   OperaChain c;
   for (const auto& e : events)
      c.insert(e);
   return c;
}

using RefMap = std::map<EventId, std::vector<EventId>>;

inline RefMap ref_map(const std::vector<EventBlock>& events) {
   RefMap m;
   for (const auto& e : events)
      m[e.id] = e.refs();
   return m;
}

/// Exhaustive DFS: longest ref path from v down to a leaf, counted in vertices.
inline std::map<EventId, std::uint32_t> longest_path_oracle(const RefMap& refs) {
   std::map<EventId, std::uint32_t>               memo;
   std::function<std::uint32_t(const EventId&)> depth = [&](const EventId& v) -> std::uint32_t {
      if (auto it = memo.find(v); it != memo.end())
         return it->second;
      std::uint32_t best = 0;
      for (const auto& r : refs.at(v))
         best = std::max(best, depth(r));
      return memo[v] = best + 1;
   };
   for (const auto& [v, _] : refs)
      depth(v);
   return memo;
}

/// Ancestors of v (excluding v) by plain DFS.
inline std::set<EventId> ancestors_oracle(const RefMap& refs, const EventId& v) {
   std::set<EventId>    seen;
   std::vector<EventId> stack(refs.at(v).begin(), refs.at(v).end());
   while (!stack.empty()) {
      auto x = stack.back();
      stack.pop_back();
      if (!seen.insert(x).second)
         continue;
      for (const auto& r : refs.at(x))
         stack.push_back(r);
   }
   return seen;
}

} // namespace onlay::test
