#include "support.hpp"

#include "onlay/finality.hpp"

#include <doctest.h>

using namespace onlay;
using onlay::test::Fixture;

namespace {

struct Built {
   Layering         lay;
   RootGraphBuilder roots;
};

Built build(const OperaChain& chain, std::size_t n) {
   Built              b{layer_lpl(DagView::from_chain(chain)), RootGraphBuilder(n)};
   std::vector<Index> all(chain.size());
   for (Index i = 0; i < all.size(); ++i)
      all[i] = i;
   b.roots.extend(chain, b.lay, all);
   return b;
}

std::set<Index> clotho_roots(const std::vector<ClothoRecord>& cs, std::uint32_t frame) {
   std::set<Index> out;
   for (const auto& c : cs)
      if (c.frame == frame)
         out.insert(c.root);
   return out;
}

} // namespace

TEST_CASE("no Clothos below gap + 1 frames") {
   Fixture f;
   test::round_robin(f, 4, 2);
   auto b = build(f.chain, 4);
   REQUIRE(b.roots.max_frame() <= 3);
   CHECK(select_all_clothos(f.chain, b.roots.frames(), 4).empty());
   CHECK(select_clothos(f.chain, b.roots.frames(), 1, 4).empty());
   FinalityEngine eng(4);
   CHECK(eng.advance(f.chain, b.lay, b.roots) == 0);
   CHECK(eng.order().ordered.empty());
}

TEST_CASE("round robin: every frame-1 root is a Clotho") {
   Fixture f;
   test::round_robin(f, 4, 8);
   auto b = build(f.chain, 4);
   REQUIRE(b.roots.max_frame() >= 5);
   auto cs = select_all_clothos(f.chain, b.roots.frames(), 4);
   CHECK(clotho_roots(cs, 1) == std::set<Index>{f.idx("a0"), f.idx("b0"), f.idx("c0"), f.idx("d0")});
   for (const auto& c : cs) {
      CHECK(b.roots.root_frame(c.nominator) == c.frame + kClothoGap);
      std::set<NodeId> w;
      for (Index x : c.witnesses) {
         CHECK(b.roots.root_frame(x) == c.frame + 1);
         CHECK(f.chain.happened_before(c.root, x));
         CHECK(f.chain.happened_before(x, c.nominator));
         w.insert(f.chain.event(x).creator);
      }
      CHECK(w.size() >= quorum(4));
   }
}

TEST_CASE("a root hidden from the quorum is not nominated") {
   // a, b and c never reference d, so d0 is reached only by d's own roots
   Fixture f;
   test::round_robin(f, 4, 10, [](std::uint32_t c, std::uint32_t o) { return c == 3 || o != 3; });
   auto        b = build(f.chain, 4);
   std::size_t looser = 0;
   auto        cs     = select_clothos(f.chain, b.roots.frames(), 1, 4, kClothoGap, &looser);
   auto        got    = clotho_roots(cs, 1);
   CHECK(got == std::set<Index>{f.idx("a0"), f.idx("b0"), f.idx("c0")});
   CHECK(looser == 0);
}

TEST_CASE("select_atropos") {
   Fixture f;
   f.add("a0", 0);
   f.add("b0", 1);
   f.add("c0", 2);
   Layering lay;
   lay.assign(0, 5);
   lay.assign(1, 3);
   lay.assign(2, 3);

   SUBCASE("single Clotho takes position 0") {
      FinalOrder st;
      auto       out = select_atropos({{0, 1, 0, {}}}, f.chain, lay, st);
      REQUIRE(out.size() == 1);
      CHECK(out[0].clotho == 0);
      CHECK(out[0].consensus_position == 0);
      // already promoted Clothos are not repeated
      CHECK(select_atropos({{0, 1, 0, {}}}, f.chain, lay, st).empty());
   }
   SUBCASE("lower layer first, then (lamport, id)") {
      FinalOrder st;
      auto       out = select_atropos({{0, 1, 0, {}}, {2, 1, 0, {}}, {1, 1, 0, {}}}, f.chain, lay, st);
      REQUIRE(out.size() == 3);
      CHECK(out[2].clotho == 0); // layer 5
      Index lo = f["b0"] < f["c0"] ? 1 : 2;
      CHECK(out[0].clotho == lo);
      CHECK(out[1].clotho == 3 - lo);
      CHECK(out[1].consensus_position == 1);
   }
   SUBCASE("frame dominates layer") {
      FinalOrder st;
      auto       out = select_atropos({{1, 2, 0, {}}, {0, 1, 0, {}}}, f.chain, lay, st);
      CHECK(out[0].clotho == 0);
   }
}

TEST_CASE("sort_vertex_by_layer") {
   Fixture f;
   f.add("a0", 0);
   f.add("b0", 1);
   f.add("b1", 1, "b0");
   f.add("b2", 1, "b1");
   f.add("b3", 1, "b2");
   f.add("b4", 1, "b3");
   f.add("b5", 1, "b4");
   f.add("a1", 0, "a0", {"b1"}); // lamport 2
   f.add("c0", 2);
   f.add("c1", 2, "c0", {"b4"}); // lamport 5
   Layering lay;
   for (Index i = 0; i < f.chain.size(); ++i)
      lay.assign(i, 1);
   CHECK(sort_vertex_by_layer(f.chain, lay, {}).empty());
   CHECK(sort_vertex_by_layer(f.chain, lay, {f.idx("c1"), f.idx("a1")}) ==
         std::vector<Index>{f.idx("a1"), f.idx("c1")});

   auto real = layer_lpl(DagView::from_chain(f.chain));
   std::vector<Index> all(f.chain.size());
   for (Index i = 0; i < all.size(); ++i)
      all[i] = i;
   auto sorted = sort_vertex_by_layer(f.chain, real, all);
   Rng  rng(4);
   for (int t = 0; t < 10; ++t) {
      for (std::size_t i = all.size(); i > 1; --i)
         std::swap(all[i - 1], all[rng.below(i)]);
      CHECK(sort_vertex_by_layer(f.chain, real, all) == sorted);
   }
   Layering partial;
   partial.assign(0, 1);
   CHECK_THROWS_AS(sort_vertex_by_layer(f.chain, partial, {0, 1}), FinalityError);
}

TEST_CASE("topo_sort_finalize skips the losing fork branch") {
   Fixture f;
   f.add("a0", 0);
   f.add("b0", 1);
   f.add("b1", 1, "b0", {"a0"});
   f.add("b1x", 1, "b0");
   f.add("a1", 0, "a0", {"b1"});
   f.add("a2", 0, "a1", {"b1x"});
   f.add("b2x", 1, "b1x", {"a0"});
   auto lay = layer_lpl(DagView::from_chain(f.chain));

   // b1 and b1x share layer 2 and lamport 1, so the smaller id wins
   std::string win = f["b1"] < f["b1x"] ? "b1" : "b1x", lose = win == "b1" ? "b1x" : "b1";
   FinalOrder  st;
   auto        atr = select_atropos({{f.idx("a2"), 1, 0, {}}}, f.chain, lay, st);
   topo_sort_finalize(f.chain, lay, atr, st);
   CHECK(st.ordered.size() == 5);
   CHECK(std::find(st.ordered.begin(), st.ordered.end(), f.idx(win)) != st.ordered.end());
   CHECK(st.skipped[f.idx(lose)]);
   CHECK(st.main_chain == std::vector<EventId>{f["a2"]});

   // an Atropos on the skipped branch is excluded, not finalized
   atr = select_atropos({{f.idx("b2x"), 2, 0, {}}}, f.chain, lay, st);
   topo_sort_finalize(f.chain, lay, atr, st);
   if (lose == "b1x") {
      CHECK(st.excluded_atropos == 1);
      CHECK(st.main_chain.size() == 1);
   } else {
      // b2x extends the emitted b1x; only b1 was dropped
      CHECK(st.main_chain.size() == 2);
   }
   std::size_t      b_count = 0;
   for (Index v : st.ordered)
      if (f.chain.event(v).creator == NodeId{1})
         CHECK(f.chain.event(v).seq == b_count++);
}

TEST_CASE("FinalityEngine on round robin") {
   Fixture f;
   test::round_robin(f, 4, 10);
   auto           b = build(f.chain, 4);
   FinalityEngine eng(4);
   auto           decided = eng.advance(f.chain, b.lay, b.roots);
   CHECK(decided > 0);
   CHECK(eng.decided_frames() == decided);
   CHECK_FALSE(eng.ready(eng.decided_frames() + 1, b.roots));
   const auto& ord = eng.order();
   REQUIRE_FALSE(ord.ordered.empty());
   CHECK(ord.main_chain.size() == ord.atropos.size());

   // ancestor closed, no duplicates, positions agree
   std::set<Index> emitted;
   for (std::size_t p = 0; p < ord.ordered.size(); ++p) {
      Index v = ord.ordered[p];
      for (Index q : f.chain.parents(v))
         CHECK(emitted.contains(q));
      CHECK(emitted.insert(v).second);
      CHECK(eng.position(v) == p);
   }
   for (const auto& a : ord.atropos)
      CHECK(eng.is_atropos(a.clotho));

   // nothing more to decide without new events
   CHECK(eng.advance(f.chain, b.lay, b.roots) == 0);
   auto text = format_final_order(f.chain, b.lay, b.roots.seen_frames(), eng);
   CHECK(text.starts_with("pos=0 event="));
   CHECK(text.find("ATROPOS") != std::string::npos);
}
