#pragma once

#include "onlay/chain.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace onlay {

enum class LayeringErrc {
   CycleDetected,
   NonReducedInput,
   InvalidWidth,
   UnlayeredDependency,
   OverlapWithSettled,
};

const char* to_string(LayeringErrc code);

class LayeringError : public std::runtime_error {
public:
   LayeringError(LayeringErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
   LayeringErrc code() const { return code_; }

private:
   LayeringErrc code_;
};

using Vertex = std::uint32_t;

// Index-addressed DAG. parents[v] are the vertices v references (edges point
// child -> parent); keys give the canonical (lamport, id) tie-break.
struct DagView {
   std::vector<std::vector<Vertex>> parents;
   std::vector<LamportKey>          keys;

   std::size_t size() const { return parents.size(); }
   std::size_t edge_count() const;

   static DagView from_chain(const OperaChain& chain);
};

// phi is 1-based; 0 marks a vertex that has not been layered.
struct Layering {
   std::vector<std::uint32_t>        phi;
   std::vector<std::vector<Vertex>>  layers; // layers[k - 1] holds layer k

   std::uint32_t height() const { return static_cast<std::uint32_t>(layers.size()); }
   std::size_t   width() const;
   std::uint32_t layer_of(Vertex v) const { return v < phi.size() ? phi[v] : 0; }
   void          assign(Vertex v, std::uint32_t layer);

   bool operator==(const Layering& o) const { return phi == o.phi; }
};

Layering layer_lpl(const DagView& dag);

/// Drops every edge (u, p) for which another parent of u reaches p.
DagView transitive_reduce(const DagView& dag);

/// First transitive edge found, if any.
std::optional<std::pair<Vertex, Vertex>> find_transitive_edge(const DagView& dag);

Layering layer_cg(const DagView& reduced, std::size_t width);

struct DiffGraph {
   std::vector<Vertex>                   vertices;
   std::vector<LamportKey>               keys; // parallel to vertices
   std::vector<std::pair<Vertex, Vertex>> edges; // (child, parent)

   bool empty() const { return vertices.empty() && edges.empty(); }
};

/// Events [from, chain.size()) with all their ref edges. With `reduced`,
/// edges made transitive by another parent are omitted.
DiffGraph diff_from_chain(const OperaChain& chain, OperaChain::Index from, bool reduced = false);

/// Whole-graph diff, in vertex order, for streaming a DagView.
DiffGraph single_vertex_diff(const DagView& dag, Vertex v);

struct LayeringState {
   std::vector<bool>          processed; // U
   std::vector<bool>          settled;   // Z
   std::uint32_t              height{0};
   std::vector<std::uint64_t> cg_order; // lambda of the diff that introduced the vertex
   Layering                   layering;
};

void layer_lpl_online(LayeringState& state, const DiffGraph& diff);
void layer_cg_online(LayeringState& state, std::size_t width, const DiffGraph& diff);

struct WidthParams {
   std::size_t n{1};
   double      w_p{0.0};
   std::size_t w_c{0};
};

double      max_width(const WidthParams& p);
std::size_t max_width_ceil(const WidthParams& p);

/// `layer <k>: <hex-id>,...` per layer, ids sorted by (lamport, id).
std::string dump_layering(const Layering& layering, const DagView& dag, const std::vector<EventId>& ids);

} // namespace onlay
