#pragma once

#include "onlay/root_frame.hpp"

#include <map>
#include <optional>
#include <vector>

namespace onlay {

enum class FinalityErrc {
   UnlayeredVertex,
   ClothoRetracted,
};

const char* to_string(FinalityErrc code);

class FinalityError : public std::runtime_error {
public:
   FinalityError(FinalityErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
   FinalityErrc code() const { return code_; }

private:
   FinalityErrc code_;
};

struct ClothoRecord {
   Index              root{0};
   std::uint32_t      frame{0};
   Index              nominator{0};
   std::vector<Index> witnesses;

   bool operator==(const ClothoRecord&) const = default;
};

struct AtroposRecord {
   Index         clotho{0};
   std::uint64_t consensus_position{0};
   std::uint64_t consensus_time{0};

   bool operator==(const AtroposRecord&) const = default;
};

struct FinalOrder {
   std::vector<Index>              ordered;
   std::vector<AtroposRecord>      atropos;
   std::vector<EventId>            main_chain;
   std::vector<bool>               processed; // U
   std::vector<bool>               skipped;   // processed but fork-excluded
   std::map<NodeId, std::uint64_t> emitted_len; // length of each creator's emitted self chain
   std::size_t                     excluded_atropos{0};

   bool is_processed(Index i) const { return i < processed.size() && processed[i]; }
   bool operator==(const FinalOrder& o) const {
      return ordered == o.ordered && atropos == o.atropos && main_chain == o.main_chain;
   }
};

/// Default distance between a Clotho's frame and its nominator's frame.
inline constexpr std::uint32_t kClothoGap = 3;

/// Clotho test for every root of `frame`: a nominator root of frame+gap and a
/// single witness set of frame+1 roots, from a quorum of distinct creators,
/// that each reach the candidate and are each reached by the nominator.
/// `looser` (optional) counts candidates the any-subset reading would accept.
std::vector<ClothoRecord> select_clothos(const OperaChain& chain, const std::vector<std::vector<Index>>& frames,
                                         std::uint32_t frame, std::size_t n, std::uint32_t gap = kClothoGap,
                                         std::size_t* looser = nullptr);

/// Every frame that has a nominator frame above it.
std::vector<ClothoRecord> select_all_clothos(const OperaChain& chain, const std::vector<std::vector<Index>>& frames,
                                             std::size_t n, std::uint32_t gap = kClothoGap);

/// Sorts by (frame, layer, lamport, id) and appends positions for Clothos not
/// yet promoted. Returns only the new records.
std::vector<AtroposRecord> select_atropos(const std::vector<ClothoRecord>& clothos, const OperaChain& chain,
                                          const Layering& layering, FinalOrder& state);

/// Peels G[a] \ U for each Atropos in order. An event is emitted only if it
/// extends its creator's emitted self chain; otherwise it and later events on
/// its branch are skipped, so no fork pair is ever finalized.
void topo_sort_finalize(const OperaChain& chain, const Layering& layering, const std::vector<AtroposRecord>& atropos,
                        FinalOrder& state);

std::vector<Index> sort_vertex_by_layer(const OperaChain& chain, const Layering& layering,
                                        std::vector<Index> vertices);

/// Decides frames as soon as every creator has progressed gap frames beyond
/// them; see README for why that point is knowledge-stable.
class FinalityEngine {
public:
   explicit FinalityEngine(std::size_t n, std::uint32_t gap = kClothoGap) : n_(n), gap_(gap) {}

   bool ready(std::uint32_t frame, const RootGraphBuilder& roots) const;

   /// Decides all newly ready frames. Returns how many were decided.
   std::size_t advance(const OperaChain& chain, const Layering& layering, const RootGraphBuilder& roots);

   std::uint32_t                     decided_frames() const { return decided_; }
   const std::vector<ClothoRecord>&  clothos() const { return clothos_; }
   const FinalOrder&                 order() const { return order_; }
   std::size_t                       looser_reading_differs() const { return looser_; }
   std::optional<std::uint64_t>      position(Index i) const;
   bool                              is_clotho(Index i) const { return clotho_set_.contains(i); }
   bool                              is_atropos(Index i) const;

private:
   std::size_t                       n_;
   std::uint32_t                     gap_;
   std::uint32_t                     decided_{0};
   std::vector<ClothoRecord>         clothos_;
   std::map<Index, std::size_t>      clotho_set_;
   FinalOrder                        order_;
   std::vector<std::int64_t>         pos_;
   std::size_t                       looser_{0};
};

/// `pos=<int> event=<creator:seq> layer=<int> lamport=<int> frame=<int> [CLOTHO|ATROPOS]`
std::string format_final_order(const OperaChain& chain, const Layering& layering,
                               const std::vector<std::uint32_t>& frames, const FinalityEngine& engine);

} // namespace onlay
