#include "onlay/layering.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace onlay {

const char* to_string(LayeringErrc code) {
   switch (code) {
   case LayeringErrc::CycleDetected: return "CycleDetected";
   case LayeringErrc::NonReducedInput: return "NonReducedInput";
   case LayeringErrc::InvalidWidth: return "InvalidWidth";
   case LayeringErrc::UnlayeredDependency: return "UnlayeredDependency";
   case LayeringErrc::OverlapWithSettled: return "OverlapWithSettled";
   }
   return "?";
}

std::size_t DagView::edge_count() const {
   std::size_t e = 0;
   for (const auto& p : parents)
      e += p.size();
   return e;
}

DagView DagView::from_chain(const OperaChain& chain) {
   DagView d;
   d.parents.resize(chain.size());
   d.keys.resize(chain.size());
   for (OperaChain::Index i = 0; i < chain.size(); ++i) {
      auto ps      = chain.parents(i);
      d.parents[i] = {ps.begin(), ps.end()};
      d.keys[i]    = lamport_key(chain.event(i));
   }
   return d;
}

std::size_t Layering::width() const {
   std::size_t w = 0;
   for (const auto& l : layers)
      w = std::max(w, l.size());
   return w;
}

void Layering::assign(Vertex v, std::uint32_t layer) {
   if (phi.size() <= v)
      phi.resize(v + 1, 0);
   phi[v] = layer;
   if (layers.size() < layer)
      layers.resize(layer);
   layers[layer - 1].push_back(v);
}

namespace {

// Vertices in an order where parents come first. Throws on a cycle.
std::vector<Vertex> topo_order(const DagView& dag) {
   std::size_t                      n = dag.size();
   std::vector<std::size_t>         pending(n);
   std::vector<std::vector<Vertex>> children(n);
   for (Vertex v = 0; v < n; ++v) {
      pending[v] = dag.parents[v].size();
      for (Vertex p : dag.parents[v])
         children[p].push_back(v);
   }
   std::vector<Vertex> order;
   order.reserve(n);
   for (Vertex v = 0; v < n; ++v)
      if (pending[v] == 0)
         order.push_back(v);
   for (std::size_t i = 0; i < order.size(); ++i)
      for (Vertex c : children[order[i]])
         if (--pending[c] == 0)
            order.push_back(c);
   if (order.size() != n)
      throw LayeringError(LayeringErrc::CycleDetected, std::to_string(n - order.size()) + " vertices on a cycle");
   return order;
}

using Bits = std::vector<std::uint64_t>;

std::vector<Bits> ancestor_bits(const DagView& dag, const std::vector<Vertex>& order) {
   std::size_t       words = (dag.size() + 63) / 64;
   std::vector<Bits> anc(dag.size(), Bits(words, 0));
   for (Vertex v : order)
      for (Vertex p : dag.parents[v]) {
         for (std::size_t w = 0; w < words; ++w)
            anc[v][w] |= anc[p][w];
         anc[v][p / 64] |= std::uint64_t{1} << (p % 64);
      }
   return anc;
}

bool has_bit(const Bits& b, Vertex v) { return (b[v / 64] >> (v % 64)) & 1u; }

// Lowest layer >= from with fewer than `width` vertices, else a new top layer.
std::uint32_t place(Layering& out, Vertex v, std::uint32_t from, std::size_t width) {
   std::uint32_t l = from;
   while (l <= out.height() && out.layers[l - 1].size() >= width)
      ++l;
   out.assign(v, l);
   return l;
}

template <class Parents>
std::uint32_t min_layer(const Layering& lay, const Parents& parents) {
   std::uint32_t m = 0;
   for (Vertex p : parents)
      m = std::max(m, lay.layer_of(p));
   return m + 1;
}

// lambda: ascending (children count, key); the vertex chosen i-th gets i.
template <class Key>
std::vector<std::uint64_t> cg_labels(const std::vector<Vertex>& vs, const std::vector<std::size_t>& children,
                                     const Key& key) {
   std::vector<std::size_t> idx(vs.size());
   for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = i;
   std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (children[a] != children[b])
         return children[a] < children[b];
      return key(a) < key(b);
   });
   std::vector<std::uint64_t> lambda(vs.size());
   for (std::size_t i = 0; i < idx.size(); ++i)
      lambda[idx[i]] = i + 1;
   return lambda;
}

} // namespace

Layering layer_lpl(const DagView& dag) {
   Layering out;
   out.phi.assign(dag.size(), 0);
   for (Vertex v : topo_order(dag))
      out.assign(v, min_layer(out, dag.parents[v]));
   return out;
}

DagView transitive_reduce(const DagView& dag) {
   auto    anc = ancestor_bits(dag, topo_order(dag));
   DagView out = dag;
   for (Vertex v = 0; v < dag.size(); ++v) {
      const auto&         ps = dag.parents[v];
      std::vector<Vertex> kept;
      for (Vertex p : ps) {
         bool transitive = std::any_of(ps.begin(), ps.end(), [&](Vertex q) { return q != p && has_bit(anc[q], p); });
         if (!transitive)
            kept.push_back(p);
      }
      out.parents[v] = std::move(kept);
   }
   return out;
}

std::optional<std::pair<Vertex, Vertex>> find_transitive_edge(const DagView& dag) {
   auto anc = ancestor_bits(dag, topo_order(dag));
   for (Vertex v = 0; v < dag.size(); ++v)
      for (Vertex p : dag.parents[v])
         for (Vertex q : dag.parents[v])
            if (q != p && has_bit(anc[q], p))
               return std::pair{v, p};
   return std::nullopt;
}

Layering layer_cg(const DagView& reduced, std::size_t width) {
   if (width < 1)
      throw LayeringError(LayeringErrc::InvalidWidth, "width must be at least 1");
   if (auto e = find_transitive_edge(reduced))
      throw LayeringError(LayeringErrc::NonReducedInput,
                          "transitive edge " + std::to_string(e->first) + "->" + std::to_string(e->second));

   std::size_t                      n = reduced.size();
   std::vector<Vertex>              all(n);
   std::vector<std::size_t>         nchildren(n, 0), pending(n);
   std::vector<std::vector<Vertex>> children(n);
   for (Vertex v = 0; v < n; ++v) {
      all[v]     = v;
      pending[v] = reduced.parents[v].size();
      for (Vertex p : reduced.parents[v]) {
         ++nchildren[p];
         children[p].push_back(v);
      }
   }
   auto lambda = cg_labels(all, nchildren, [&](std::size_t i) { return reduced.keys[i]; });

   Layering out;
   out.phi.assign(n, 0);
   std::priority_queue<std::pair<std::uint64_t, Vertex>> ready;
   for (Vertex v = 0; v < n; ++v)
      if (pending[v] == 0)
         ready.emplace(lambda[v], v);
   while (!ready.empty()) {
      Vertex v = ready.top().second;
      ready.pop();
      place(out, v, min_layer(out, reduced.parents[v]), width);
      for (Vertex c : children[v])
         if (--pending[c] == 0)
            ready.emplace(lambda[c], c);
   }
   return out;
}

DiffGraph diff_from_chain(const OperaChain& chain, OperaChain::Index from, bool reduced) {
   DiffGraph d;
   for (auto i = from; i < chain.size(); ++i) {
      d.vertices.push_back(i);
      d.keys.push_back(lamport_key(chain.event(i)));
      auto ps = chain.parents(i);
      for (auto p : ps) {
         if (reduced && std::any_of(ps.begin(), ps.end(), [&](auto q) { return q != p && chain.happened_before(p, q); }))
            continue;
         d.edges.emplace_back(i, p);
      }
   }
   return d;
}

DiffGraph single_vertex_diff(const DagView& dag, Vertex v) {
   DiffGraph d;
   d.vertices.push_back(v);
   d.keys.push_back(dag.keys[v]);
   for (Vertex p : dag.parents[v])
      d.edges.emplace_back(v, p);
   return d;
}

namespace {

struct LocalDiff {
   std::unordered_map<Vertex, std::size_t> slot;
   std::vector<std::vector<Vertex>>        parents;  // per slot
   std::vector<std::vector<std::size_t>>   children; // slots
   std::vector<std::size_t>                pending;  // unlayered parents inside the diff
};

LocalDiff prepare(LayeringState& state, const DiffGraph& diff) {
   LocalDiff ld;
   Vertex    top = 0;
   for (std::size_t i = 0; i < diff.vertices.size(); ++i) {
      Vertex v = diff.vertices[i];
      top      = std::max(top, v + 1);
      if ((v < state.processed.size() && state.processed[v]) || !ld.slot.emplace(v, i).second)
         throw LayeringError(LayeringErrc::OverlapWithSettled, "vertex " + std::to_string(v) + " already layered");
   }
   if (state.processed.size() < top) {
      state.processed.resize(top, false);
      state.settled.resize(top, false);
      state.cg_order.resize(top, 0);
      state.layering.phi.resize(top, 0);
   }
   std::size_t m = diff.vertices.size();
   ld.parents.resize(m);
   ld.children.resize(m);
   ld.pending.assign(m, 0);
   for (auto [child, parent] : diff.edges) {
      auto c = ld.slot.find(child);
      if (c == ld.slot.end())
         throw LayeringError(LayeringErrc::OverlapWithSettled, "edge from settled vertex " + std::to_string(child));
      ld.parents[c->second].push_back(parent);
      if (auto p = ld.slot.find(parent); p != ld.slot.end()) {
         ld.children[p->second].push_back(c->second);
         ++ld.pending[c->second];
      } else if (parent >= state.processed.size() || !state.processed[parent]) {
         throw LayeringError(LayeringErrc::UnlayeredDependency,
                             "vertex " + std::to_string(child) + " references unlayered " + std::to_string(parent));
      }
   }
   return ld;
}

void settle(LayeringState& state, const DiffGraph& diff) {
   for (Vertex v : diff.vertices) {
      state.processed[v] = true;
      state.settled[v]   = true;
   }
   state.height = state.layering.height();
}

} // namespace

void layer_lpl_online(LayeringState& state, const DiffGraph& diff) {
   if (diff.empty())
      return;
   auto                     ld = prepare(state, diff);
   std::vector<std::size_t> queue;
   for (std::size_t i = 0; i < diff.vertices.size(); ++i)
      if (ld.pending[i] == 0)
         queue.push_back(i);
   for (std::size_t q = 0; q < queue.size(); ++q) {
      std::size_t i = queue[q];
      state.layering.assign(diff.vertices[i], min_layer(state.layering, ld.parents[i]));
      for (std::size_t c : ld.children[i])
         if (--ld.pending[c] == 0)
            queue.push_back(c);
   }
   if (queue.size() != diff.vertices.size())
      throw LayeringError(LayeringErrc::CycleDetected, "diff is not acyclic");
   settle(state, diff);
}

void layer_cg_online(LayeringState& state, std::size_t width, const DiffGraph& diff) {
   if (width < 1)
      throw LayeringError(LayeringErrc::InvalidWidth, "width must be at least 1");
   if (diff.empty())
      return;
   auto                     ld = prepare(state, diff);
   std::vector<std::size_t> nchildren(diff.vertices.size());
   for (std::size_t i = 0; i < nchildren.size(); ++i)
      nchildren[i] = ld.children[i].size();
   auto lambda = cg_labels(diff.vertices, nchildren, [&](std::size_t i) { return diff.keys[i]; });

   std::priority_queue<std::pair<std::uint64_t, std::size_t>> ready;
   for (std::size_t i = 0; i < diff.vertices.size(); ++i) {
      state.cg_order[diff.vertices[i]] = lambda[i];
      if (ld.pending[i] == 0)
         ready.emplace(lambda[i], i);
   }
   std::size_t placed = 0;
   while (!ready.empty()) {
      std::size_t i = ready.top().second;
      ready.pop();
      place(state.layering, diff.vertices[i], min_layer(state.layering, ld.parents[i]), width);
      ++placed;
      for (std::size_t c : ld.children[i])
         if (--ld.pending[c] == 0)
            ready.emplace(lambda[c], c);
   }
   if (placed != diff.vertices.size())
      throw LayeringError(LayeringErrc::CycleDetected, "diff is not acyclic");
   settle(state, diff);
}

double max_width(const WidthParams& p) {
   auto n = static_cast<double>(p.n);
   return n + n * p.w_p * static_cast<double>(p.w_c) / 3.0;
}

std::size_t max_width_ceil(const WidthParams& p) {
   // Round in exact arithmetic where possible: n*w_p*w_c is usually a small rational.
   double w = max_width(p);
   auto   r = static_cast<std::size_t>(std::llround(w));
   if (std::fabs(w - static_cast<double>(r)) < 1e-9)
      return r;
   return static_cast<std::size_t>(std::ceil(w));
}

std::string dump_layering(const Layering& layering, const DagView& dag, const std::vector<EventId>& ids) {
   std::ostringstream out;
   for (std::uint32_t k = 1; k <= layering.height(); ++k) {
      auto vs = layering.layers[k - 1];
      std::sort(vs.begin(), vs.end(), [&](Vertex a, Vertex b) { return dag.keys[a] < dag.keys[b]; });
      out << "layer " << k << ":";
      for (std::size_t i = 0; i < vs.size(); ++i)
         out << (i ? "," : " ") << ids[vs[i]].hex();
      out << '\n';
   }
   return out.str();
}

} // namespace onlay
