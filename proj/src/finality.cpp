#include "onlay/finality.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

namespace onlay {

const char* to_string(FinalityErrc code) {
   switch (code) {
   case FinalityErrc::UnlayeredVertex: return "UnlayeredVertex";
   case FinalityErrc::ClothoRetracted: return "ClothoRetracted";
   }
   return "?";
}

namespace {

std::size_t distinct_creators(const OperaChain& chain, const std::vector<Index>& vs) {
   std::set<NodeId> cs;
   for (Index v : vs)
      cs.insert(chain.event(v).creator);
   return cs.size();
}

} // namespace

std::vector<ClothoRecord> select_clothos(const OperaChain& chain, const std::vector<std::vector<Index>>& frames,
                                         std::uint32_t frame, std::size_t n, std::uint32_t gap, std::size_t* looser) {
   std::vector<ClothoRecord> out;
   if (frame == 0 || gap < 1 || frames.size() < frame + gap)
      return out;
   const auto& candidates = frames[frame - 1];
   const auto& next       = frames[frame];
   const auto& nominators = frames[frame + gap - 1];
   std::size_t q          = quorum(n);

   for (Index r : candidates) {
      bool decided = false;
      for (Index k : nominators) {
         std::vector<Index> w;
         for (Index x : next)
            if (chain.happened_before(r, x) && chain.happened_before(x, k))
               w.push_back(x);
         if (distinct_creators(chain, w) >= q) {
            out.push_back({r, frame, k, std::move(w)});
            decided = true;
            break;
         }
      }
      if (decided || !looser)
         continue;
      std::vector<Index> reaching;
      for (Index x : next)
         if (chain.happened_before(r, x))
            reaching.push_back(x);
      if (distinct_creators(chain, reaching) < q)
         continue;
      for (Index k : nominators) {
         std::vector<Index> dominated;
         for (Index x : next)
            if (chain.happened_before(x, k))
               dominated.push_back(x);
         if (distinct_creators(chain, dominated) >= q) {
            ++*looser;
            break;
         }
      }
   }
   return out;
}

std::vector<ClothoRecord> select_all_clothos(const OperaChain& chain, const std::vector<std::vector<Index>>& frames,
                                             std::size_t n, std::uint32_t gap) {
   std::vector<ClothoRecord> out;
   for (std::uint32_t a = 1; a + gap <= frames.size(); ++a) {
      auto recs = select_clothos(chain, frames, a, n, gap);
      out.insert(out.end(), recs.begin(), recs.end());
   }
   return out;
}

std::vector<Index> sort_vertex_by_layer(const OperaChain& chain, const Layering& layering,
                                        std::vector<Index> vertices) {
   for (Index v : vertices)
      if (layering.layer_of(v) == 0)
         throw FinalityError(FinalityErrc::UnlayeredVertex, "event " + chain.event(v).label() + " has no layer");
   auto key = [&](Index v) { return std::make_tuple(layering.layer_of(v), lamport_key(chain.event(v))); };
   std::sort(vertices.begin(), vertices.end(), [&](Index a, Index b) { return key(a) < key(b); });
   return vertices;
}

std::vector<AtroposRecord> select_atropos(const std::vector<ClothoRecord>& clothos, const OperaChain& chain,
                                          const Layering& layering, FinalOrder& state) {
   std::set<Index> done;
   for (const auto& a : state.atropos)
      done.insert(a.clotho);
   std::vector<const ClothoRecord*> fresh;
   for (const auto& c : clothos)
      if (!done.contains(c.root))
         fresh.push_back(&c);
   auto key = [&](const ClothoRecord* c) {
      return std::make_tuple(c->frame, layering.layer_of(c->root), lamport_key(chain.event(c->root)));
   };
   std::sort(fresh.begin(), fresh.end(), [&](auto a, auto b) { return key(a) < key(b); });

   std::vector<AtroposRecord> out;
   for (const auto* c : fresh) {
      if (!done.insert(c->root).second)
         continue;
      std::uint64_t pos = state.atropos.size();
      state.atropos.push_back({c->root, pos, pos});
      out.push_back(state.atropos.back());
   }
   return out;
}

void topo_sort_finalize(const OperaChain& chain, const Layering& layering, const std::vector<AtroposRecord>& atropos,
                        FinalOrder& state) {
   if (state.processed.size() < chain.size()) {
      state.processed.resize(chain.size(), false);
      state.skipped.resize(chain.size(), false);
   }
   for (const auto& a : atropos) {
      if (state.processed[a.clotho])
         continue;
      std::vector<Index> rest;
      for (Index v : chain.subgraph_under(a.clotho))
         if (!state.processed[v])
            rest.push_back(v);
      for (Index v : sort_vertex_by_layer(chain, layering, std::move(rest))) {
         const auto& e   = chain.event(v);
         auto&       len = state.emitted_len[e.creator];
         bool        emit;
         if (e.is_leaf())
            emit = len == 0;
         else
            emit = !state.skipped[*chain.self_parent(v)] && e.seq == len;
         state.processed[v] = true;
         if (emit) {
            state.ordered.push_back(v);
            ++len;
         } else {
            state.skipped[v] = true;
         }
      }
      if (state.skipped[a.clotho])
         ++state.excluded_atropos;
      else
         state.main_chain.push_back(chain.event(a.clotho).id);
   }
}

bool FinalityEngine::ready(std::uint32_t frame, const RootGraphBuilder& roots) const {
   for (std::uint32_t c = 0; c < n_; ++c)
      if (roots.progress(NodeId{c}) < frame + gap_)
         return false;
   return true;
}

std::size_t FinalityEngine::advance(const OperaChain& chain, const Layering& layering, const RootGraphBuilder& roots) {
   std::size_t decided = 0;
   while (ready(decided_ + 1, roots)) {
      std::uint32_t a    = decided_ + 1;
      auto          recs = select_clothos(chain, roots.frames(), a, n_, gap_, &looser_);
      for (const auto& r : recs) {
         if (!clotho_set_.emplace(r.root, clothos_.size()).second)
            throw FinalityError(FinalityErrc::ClothoRetracted, "clotho decided twice");
         clothos_.push_back(r);
      }
      std::size_t before = order_.ordered.size();
      auto        atr    = select_atropos(recs, chain, layering, order_);
      topo_sort_finalize(chain, layering, atr, order_);
      if (pos_.size() < chain.size())
         pos_.resize(chain.size(), -1);
      for (std::size_t p = before; p < order_.ordered.size(); ++p)
         pos_[order_.ordered[p]] = static_cast<std::int64_t>(p);
      ++decided_;
      ++decided;
   }
   return decided;
}

std::optional<std::uint64_t> FinalityEngine::position(Index i) const {
   if (i >= pos_.size() || pos_[i] < 0)
      return std::nullopt;
   return static_cast<std::uint64_t>(pos_[i]);
}

bool FinalityEngine::is_atropos(Index i) const {
   if (!clotho_set_.contains(i) || !order_.is_processed(i) || order_.skipped[i])
      return false;
   return std::any_of(order_.atropos.begin(), order_.atropos.end(), [&](const auto& a) { return a.clotho == i; });
}

std::string format_final_order(const OperaChain& chain, const Layering& layering,
                               const std::vector<std::uint32_t>& frames, const FinalityEngine& engine) {
   std::ostringstream out;
   const auto&        ordered = engine.order().ordered;
   for (std::size_t p = 0; p < ordered.size(); ++p) {
      Index       v = ordered[p];
      const auto& e = chain.event(v);
      out << "pos=" << p << " event=" << e.label() << " layer=" << layering.layer_of(v) << " lamport=" << e.lamport
          << " frame=" << (v < frames.size() ? frames[v] : 0);
      if (engine.is_atropos(v))
         out << " ATROPOS";
      else if (engine.is_clotho(v))
         out << " CLOTHO";
      out << '\n';
   }
   return out.str();
}

} // namespace onlay
