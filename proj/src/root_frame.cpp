#include "onlay/root_frame.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

namespace onlay {

const char* to_string(RootFrameErrc code) {
   switch (code) {
   case RootFrameErrc::MissingLayering: return "MissingLayering";
   case RootFrameErrc::InconsistentRootGraph: return "InconsistentRootGraph";
   case RootFrameErrc::RootPinningConflict: return "RootPinningConflict";
   }
   return "?";
}

namespace {
auto layer_key(const OperaChain& chain, const Layering& lay, Index i) {
   return std::make_tuple(lay.layer_of(i), lamport_key(chain.event(i)));
}
} // namespace

void RootGraphBuilder::extend(const OperaChain& chain, const Layering& layering, std::span<const Index> fresh) {
   std::vector<Index> order(fresh.begin(), fresh.end());
   for (Index i : order)
      if (layering.layer_of(i) == 0)
         throw RootFrameError(RootFrameErrc::MissingLayering, "event " + chain.event(i).label() + " has no layer");
   std::sort(order.begin(), order.end(),
             [&](Index a, Index b) { return layer_key(chain, layering, a) < layer_key(chain, layering, b); });
   if (seen_.size() < chain.size()) {
      seen_.resize(chain.size(), 0);
      root_.resize(chain.size(), 0);
   }
   std::size_t q = quorum(n_);

   for (Index v : order) {
      const auto&   e     = chain.event(v);
      std::uint32_t frame = 1;
      bool          root  = true;
      if (!e.is_leaf()) {
         std::uint32_t base = 0;
         for (Index p : chain.parents(v)) {
            if (seen_[p] == 0)
               throw RootFrameError(RootFrameErrc::MissingLayering, "parent of " + e.label() + " not processed");
            base = std::max(base, seen_[p]);
         }
         // Highest-layer reached root of frame f, per creator.
         auto reach = [&](std::uint32_t f) {
            std::map<NodeId, Index> reached;
            if (f == 0 || f > by_frame_.size())
               return reached;
            for (Index r : by_frame_[f - 1]) {
               if (!chain.happened_before(r, v))
                  continue;
               auto [it, fresh_creator] = reached.emplace(chain.event(r).creator, r);
               if (!fresh_creator && layering.layer_of(r) > layering.layer_of(it->second))
                  it->second = r;
            }
            return reached;
         };
         auto reached = reach(base);
         if (reached.size() >= q) {
            frame = base + 1;
         } else {
            frame = base;
            root  = base > seen_[*chain.self_parent(v)];
            if (root)
               reached = reach(base - 1);
         }
         if (root)
            for (const auto& [c, r] : reached)
               edges_.emplace_back(v, r);
      }
      seen_[v] = frame;
      auto& prog = progress_[e.creator];
      prog       = std::max(prog, frame);
      if (!root)
         continue;
      root_[v] = frame;
      if (by_frame_.size() < frame)
         by_frame_.resize(frame);
      auto& list = by_frame_[frame - 1];
      auto  key  = layer_key(chain, layering, v);
      list.insert(std::upper_bound(list.begin(), list.end(), key,
                                   [&](const auto& k, Index o) { return k < layer_key(chain, layering, o); }),
                  v);
      auto [it, inserted] = active_.emplace(e.creator, v);
      if (!inserted) {
         Index old = it->second;
         if (root_[old] < frame || (root_[old] == frame && key < layer_key(chain, layering, old)))
            it->second = v;
      }
   }
}

std::span<const Index> RootGraphBuilder::frame_roots(std::uint32_t f) const {
   if (f == 0 || f > by_frame_.size())
      return {};
   return by_frame_[f - 1];
}

std::uint32_t RootGraphBuilder::progress(NodeId creator) const {
   auto it = progress_.find(creator);
   return it == progress_.end() ? 0 : it->second;
}

RootGraph RootGraphBuilder::graph(const OperaChain& chain, const Layering& layering) const {
   RootGraph g;
   for (const auto& list : by_frame_)
      g.roots.insert(g.roots.end(), list.begin(), list.end());
   std::sort(g.roots.begin(), g.roots.end(),
             [&](Index a, Index b) { return layer_key(chain, layering, a) < layer_key(chain, layering, b); });
   g.edges = edges_;
   std::sort(g.edges.begin(), g.edges.end());
   g.active_set = active_;
   return g;
}

RootGraph build_root_graph(const OperaChain& chain, const Layering& layering, std::size_t n) {
   RootGraphBuilder   b(n);
   std::vector<Index> all(chain.size());
   for (Index i = 0; i < all.size(); ++i)
      all[i] = i;
   b.extend(chain, layering, all);
   return b.graph(chain, layering);
}

std::vector<std::uint32_t> assign_root_frames(const OperaChain& chain, const RootGraph& rg, std::size_t n) {
   std::vector<std::uint32_t>         frame(chain.size(), 0);
   std::map<Index, std::vector<Index>> out;
   for (auto [u, v] : rg.edges)
      out[u].push_back(v);
   std::vector<Index> roots = rg.roots;
   std::sort(roots.begin(), roots.end()); // chain order is causal
   std::set<Index> is_root(roots.begin(), roots.end());
   auto            fail = [&](Index r, const std::string& why) {
      throw RootFrameError(RootFrameErrc::InconsistentRootGraph, "root " + chain.event(r).label() + ": " + why);
   };

   std::size_t q = quorum(n);
   for (Index r : roots) {
      const auto& targets = out[r];
      if (chain.event(r).is_leaf()) {
         if (!targets.empty())
            fail(r, "leaf root with outgoing edges");
         frame[r] = 1;
         continue;
      }
      std::uint32_t    f = 0;
      std::set<NodeId> creators;
      for (Index t : targets) {
         if (!is_root.contains(t) || frame[t] == 0)
            fail(r, "edge to a non-root");
         if (!chain.happened_before(t, r))
            fail(r, "edge target not reachable");
         if (f != 0 && frame[t] != f)
            fail(r, "edge targets span frames");
         f = frame[t];
         if (!creators.insert(chain.event(t).creator).second)
            fail(r, "two edges to one creator");
      }
      if (creators.size() < q)
         fail(r, "fewer than quorum edges");
      // Largest frame i whose roots under r cover a quorum must be f.
      std::map<std::uint32_t, std::set<NodeId>> reach;
      for (Index o : roots) {
         if (o >= r)
            break;
         if (frame[o] > f && chain.happened_before(o, r))
            reach[frame[o]].insert(chain.event(o).creator);
      }
      for (const auto& [g, cs] : reach)
         if (cs.size() >= q)
            fail(r, "reaches a quorum of frame " + std::to_string(g) + " above its edge frame");
      frame[r] = f + 1;
   }
   return frame;
}

FrameAssignment assign_vertex_frames(const OperaChain& chain, const Layering& layering,
                                     const std::vector<std::uint32_t>& phi_R) {
   FrameAssignment fa;
   fa.phi_R = phi_R;
   fa.phi_R.resize(chain.size(), 0);
   std::vector<std::uint32_t> bucket(layering.height() + 1, 0);
   for (Index i = 0; i < chain.size(); ++i)
      if (fa.phi_R[i]) {
         auto l    = layering.layer_of(i);
         bucket[l] = std::max(bucket[l], fa.phi_R[i]);
      }
   std::uint32_t running = 1;
   for (std::size_t l = 1; l < bucket.size(); ++l) {
      running   = std::max(running, bucket[l]);
      bucket[l] = running;
   }
   fa.phi_F.assign(chain.size(), 0);
   for (Index i = 0; i < chain.size(); ++i) {
      auto l = layering.layer_of(i);
      if (l == 0)
         throw RootFrameError(RootFrameErrc::MissingLayering, "event " + chain.event(i).label() + " has no layer");
      fa.phi_F[i] = bucket[l];
      if (fa.phi_R[i]) {
         fa.frames[fa.phi_R[i]].push_back(i);
         if (fa.phi_R[i] != bucket[l])
            fa.conflicts.push_back({i, fa.phi_R[i], bucket[l]});
      }
   }
   return fa;
}

std::string format_roots(const OperaChain& chain, const RootGraph& rg, const std::vector<std::uint32_t>& phi_R) {
   std::map<std::uint32_t, std::vector<Index>> frames;
   for (Index r : rg.roots)
      frames[phi_R.at(r)].push_back(r);
   std::ostringstream out;
   for (const auto& [f, rs] : frames) {
      out << "frame " << f << ":";
      for (std::size_t i = 0; i < rs.size(); ++i)
         out << (i ? "," : " ") << chain.event(rs[i]).label();
      out << '\n';
   }
   return out.str();
}

} // namespace onlay
