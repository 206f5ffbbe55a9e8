#pragma once

#include "onlay/chain.hpp"
#include "onlay/layering.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace onlay {

enum class RootFrameErrc {
   MissingLayering,
   InconsistentRootGraph,
   RootPinningConflict,
};

const char* to_string(RootFrameErrc code);

class RootFrameError : public std::runtime_error {
public:
   RootFrameError(RootFrameErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
   RootFrameErrc code() const { return code_; }

private:
   RootFrameErrc code_;
};

using Index = OperaChain::Index;

/// floor(2n/3) + 1
inline std::size_t quorum(std::size_t n) { return 2 * n / 3 + 1; }

struct RootRecord {
   EventId       event;
   std::uint32_t frame{0};
   std::uint32_t layer{0};
   NodeId        creator;

   bool operator==(const RootRecord&) const = default;
};

struct RootGraph {
   std::vector<Index>                 roots; // V_R, sorted by (layer, lamport, id)
   std::vector<std::pair<Index, Index>> edges; // E_R, sorted
   std::map<NodeId, Index>            active_set;

   bool operator==(const RootGraph&) const = default;
};

/// Incremental root selection over an H-OPERA chain. An event starts from the
/// highest frame among its parents and moves one frame up when it reaches
/// roots of that frame from a quorum of distinct creators. It is a root when
/// it is a leaf or its frame exceeds its self parent's. Both facts depend only
/// on the event's own ancestry, so extending the chain never revisits earlier
/// decisions.
class RootGraphBuilder {
public:
   explicit RootGraphBuilder(std::size_t n) : n_(n) {}

   /// Processes `fresh` (ancestors first; sorted by layer internally).
   void extend(const OperaChain& chain, const Layering& layering, std::span<const Index> fresh);

   std::size_t   n() const { return n_; }
   std::uint32_t seen_frame(Index i) const { return i < seen_.size() ? seen_[i] : 0; }
   std::uint32_t root_frame(Index i) const { return i < root_.size() ? root_[i] : 0; }
   bool          is_root(Index i) const { return root_frame(i) != 0; }
   std::uint32_t max_frame() const { return static_cast<std::uint32_t>(by_frame_.size()); }

   /// Roots of frame f sorted by (layer, lamport, id).
   std::span<const Index> frame_roots(std::uint32_t f) const;
   const std::vector<std::vector<Index>>& frames() const { return by_frame_; }

   /// Highest seen frame among the creator's events (0 if none).
   std::uint32_t progress(NodeId creator) const;

   /// Root graph with V_R and E_R in canonical order.
   RootGraph graph(const OperaChain& chain, const Layering& layering) const;

   const std::vector<std::uint32_t>& root_frames() const { return root_; }
   const std::vector<std::uint32_t>& seen_frames() const { return seen_; }

private:
   std::size_t                          n_;
   std::vector<std::uint32_t>           seen_;
   std::vector<std::uint32_t>           root_;
   std::vector<std::vector<Index>>      by_frame_; // by_frame_[f - 1]
   std::vector<std::pair<Index, Index>> edges_;
   std::map<NodeId, Index>              active_;
   std::map<NodeId, std::uint32_t>      progress_;
};

RootGraph build_root_graph(const OperaChain& chain, const Layering& layering, std::size_t n);

/// Recomputes root frames from the root graph alone (leaves 1, otherwise one
/// above the frame of the E_R targets). Throws InconsistentRootGraph when the
/// targets disagree, miss the quorum or are unreachable. Result is indexed by
/// chain index, 0 for non-roots.
std::vector<std::uint32_t> assign_root_frames(const OperaChain& chain, const RootGraph& rg, std::size_t n);

struct PinningConflict {
   Index         root;
   std::uint32_t root_frame;
   std::uint32_t layer_frame;
};

struct FrameAssignment {
   std::vector<std::uint32_t>                   phi_R; // 0 for non-roots
   std::vector<std::uint32_t>                   phi_F;
   std::map<std::uint32_t, std::vector<Index>>  frames;
   std::vector<PinningConflict>                 conflicts;
};

/// Layer-bucket rule: a layer's frame is the highest root frame at or below it.
FrameAssignment assign_vertex_frames(const OperaChain& chain, const Layering& layering,
                                     const std::vector<std::uint32_t>& phi_R);

/// `frame <i>: <creator:seq>,...` lines.
std::string format_roots(const OperaChain& chain, const RootGraph& rg, const std::vector<std::uint32_t>& phi_R);

} // namespace onlay
