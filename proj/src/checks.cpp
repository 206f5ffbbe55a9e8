#include "onlay/checks.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace onlay {

namespace {

using BlockMap = std::unordered_map<EventId, const EventBlock*>;

BlockMap index_view(const std::vector<EventBlock>& view) {
   BlockMap m;
   for (const auto& e : view)
      m.emplace(e.id, &e);
   return m;
}

std::optional<ChainViolation> compare_views(std::size_t ia, std::size_t ib, const std::vector<EventBlock>& va,
                                            const BlockMap& a, const BlockMap& b) {
   // 0 unknown, 1 in progress, 2 equal, 3 differs
   std::unordered_map<EventId, int>         state;
   std::vector<std::pair<const EventBlock*, std::string>> causes;
   std::size_t                              affected = 0;

   std::function<bool(const EventId&)> differs = [&](const EventId& id) -> bool {
      auto& st = state[id];
      if (st >= 2)
         return st == 3;
      if (st == 1)
         return true; // a cycle can only come from a tampered record
      st          = 1;
      auto ea     = a.find(id);
      auto eb     = b.find(id);
      bool bad    = false;
      std::string why;
      if (ea == a.end() || eb == b.end()) {
         bad = true;
         why = "ref missing from one view";
      } else if (!(*ea->second == *eb->second)) {
         bad = true;
         why = "record differs";
      } else {
         for (const auto& r : ea->second->refs())
            if (differs(r))
               bad = true;
      }
      state[id] = bad ? 3 : 2;
      if (!why.empty() && ea != a.end())
         causes.emplace_back(ea->second, why);
      else if (!why.empty() && eb != b.end())
         causes.emplace_back(eb->second, why);
      return bad;
   };

   for (const auto& e : va) {
      if (!b.contains(e.id))
         continue;
      if (differs(e.id))
         ++affected;
   }
   if (!affected)
      return std::nullopt;
   std::sort(causes.begin(), causes.end(),
             [](const auto& x, const auto& y) { return lamport_key(*x.first) < lamport_key(*y.first); });
   ChainViolation v{ia, ib, {}, "", affected};
   if (!causes.empty()) {
      v.event  = causes.front().first->id;
      v.reason = causes.front().second;
   }
   return v;
}

std::vector<const Node*> honest(const RunResult& r) {
   std::vector<const Node*> out;
   for (const auto& n : r.nodes)
      if (r.config.honest(n.id()))
         out.push_back(&n);
   return out;
}

CheckResult fail(std::string name, std::string detail) { return {std::move(name), false, std::move(detail)}; }

std::string hex_digest(const std::string& s) {
   return to_hex(sha256({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}));
}

} // namespace

std::vector<ChainViolation> check_consistent_chains(const std::vector<std::vector<EventBlock>>& views) {
   std::vector<BlockMap> maps;
   for (const auto& v : views)
      maps.push_back(index_view(v));
   std::vector<ChainViolation> out;
   for (std::size_t i = 0; i < views.size(); ++i)
      for (std::size_t j = i + 1; j < views.size(); ++j)
         if (auto v = compare_views(i, j, views[i], maps[i], maps[j]))
            out.push_back(std::move(*v));
   return out;
}

bool check_consistent_cut(const std::vector<std::vector<EventBlock>>& views, const std::vector<std::size_t>& cut) {
   if (cut.size() != views.size())
      throw InvalidCut("cut has " + std::to_string(cut.size()) + " entries for " + std::to_string(views.size()) +
                       " views");
   std::unordered_set<EventId> members;
   for (std::size_t i = 0; i < views.size(); ++i) {
      if (cut[i] > views[i].size())
         throw InvalidCut("cut[" + std::to_string(i) + "] exceeds the view length");
      for (std::size_t k = 0; k < cut[i]; ++k)
         members.insert(views[i][k].id);
   }
   for (std::size_t i = 0; i < views.size(); ++i)
      for (std::size_t k = 0; k < cut[i]; ++k)
         for (const auto& r : views[i][k].refs())
            if (!members.contains(r))
               return false;
   return true;
}

bool is_ancestor_closed(const OperaChain& chain, const std::vector<Index>& events) {
   std::vector<bool> in(chain.size(), false);
   for (Index i : events)
      in[i] = true;
   for (Index i : events)
      for (Index p : chain.parents(i))
         if (!in[p])
            return false;
   return true;
}

EquivalenceReport check_equivalence(const OperaChain& chain, std::size_t W) {
   EquivalenceReport rep;
   auto              dag = DagView::from_chain(chain);
   auto              lpl = layer_lpl(dag);
   auto              cg  = layer_cg(transitive_reduce(dag), W);
   rep.lpl_width         = lpl.width();
   rep.cg_width          = cg.width();
   for (Vertex v = 0; v < dag.size(); ++v)
      if (lpl.layer_of(v) != cg.layer_of(v)) {
         rep.equal          = false;
         rep.counterexample = chain.event(v).id;
         rep.lpl_layer      = lpl.layer_of(v);
         rep.cg_layer       = cg.layer_of(v);
         break;
      }
   return rep;
}

CheckResult check_chains(const RunResult& r) {
   std::vector<std::vector<EventBlock>> views;
   for (const auto* n : honest(r))
      views.push_back(n->chain().events());
   auto v = check_consistent_chains(views);
   if (v.empty())
      return {"consistent_chains", true, ""};
   std::ostringstream d;
   d << v.size() << " pairs; first " << v[0].a << "/" << v[0].b << " at " << v[0].event.short_hex() << " ("
     << v[0].reason << ")";
   return fail("consistent_chains", d.str());
}

CheckResult check_root_frame_agreement(const RunResult& r) {
   auto hs = honest(r);
   for (std::size_t i = 1; i < hs.size(); ++i) {
      const auto& a = *hs[0];
      const auto& b = *hs[i];
      for (Index x = 0; x < a.chain().size(); ++x) {
         auto y = b.chain().find(a.chain().event(x).id);
         if (!y)
            continue;
         bool same = a.layering().layer_of(x) == b.layering().layer_of(*y) &&
                     a.roots().seen_frame(x) == b.roots().seen_frame(*y) &&
                     a.roots().root_frame(x) == b.roots().root_frame(*y);
         if (!same)
            return fail("root_frame_agreement", "nodes " + std::to_string(a.id().value) + "/" +
                                                    std::to_string(b.id().value) + " disagree on " +
                                                    a.chain().event(x).label());
      }
   }
   return {"root_frame_agreement", true, ""};
}

CheckResult check_order_agreement(const RunResult& r) {
   auto ids = [](const Node& n) {
      std::vector<EventId> out;
      for (Index i : n.final_order().ordered)
         out.push_back(n.chain().event(i).id);
      return out;
   };
   auto hs = honest(r);
   if (hs.empty())
      return {"order_agreement", true, ""};
   auto ref = ids(*hs[0]);
   for (std::size_t i = 1; i < hs.size(); ++i) {
      if (ids(*hs[i]) != ref)
         return fail("order_agreement", "node " + std::to_string(hs[i]->id().value) + " differs from node " +
                                            std::to_string(hs[0]->id().value));
      if (hs[i]->final_order().main_chain != hs[0]->final_order().main_chain)
         return fail("order_agreement", "main chain differs on node " + std::to_string(hs[i]->id().value));
   }
   return {"order_agreement", true, "ordered=" + std::to_string(ref.size())};
}

CheckResult check_fork_exclusion(const RunResult& r) {
   std::size_t pairs = 0;
   for (const auto* n : honest(r)) {
      const auto& chain = n->chain();
      auto        rep   = n->reported_roots();
      std::unordered_set<Index> reported(rep.begin(), rep.end());
      for (const auto& [x, y] : chain.detect_forks()) {
         ++pairs;
         Index ix = chain.index_of(x), iy = chain.index_of(y);
         if (n->finality().position(ix) && n->finality().position(iy))
            return fail("fork_exclusion", "node " + std::to_string(n->id().value) + " finalized both " +
                                              chain.event(ix).label() + " members");
         if (reported.contains(ix) && reported.contains(iy))
            return fail("fork_exclusion", "node " + std::to_string(n->id().value) + " reports both " +
                                              chain.event(ix).label() + " members as roots");
      }
   }
   return {"fork_exclusion", true, "pairs=" + std::to_string(pairs)};
}

CheckResult check_incremental_batch(const RunResult& r) {
   for (const auto& n : r.nodes) {
      auto chk = n.check_against_batch();
      if (!chk.ok())
         return fail("incremental_batch", "node " + std::to_string(n.id().value) + ": " + chk.detail);
   }
   return {"incremental_batch", true, ""};
}

CheckResult check_buffers_empty(const RunResult& r) {
   for (const auto* n : honest(r))
      if (n->pending_count())
         return fail("buffers_empty", "node " + std::to_string(n->id().value) + " holds " +
                                          std::to_string(n->pending_count()) + " buffered events");
   return {"buffers_empty", true, ""};
}

bool global_state_is_cut(const OperaChain& chain, const GlobalState& gs) {
   std::set<Index>                       in(gs.events.begin(), gs.events.end());
   std::vector<std::vector<EventBlock>>  views;
   std::vector<std::size_t>              cut;
   for (NodeId c : chain.creators()) {
      auto&       view = views.emplace_back();
      std::size_t len  = 0;
      bool        gap  = false;
      for (Index i : chain.by_creator(c)) {
         view.push_back(chain.event(i));
         if (!in.contains(i))
            gap = true;
         else if (gap)
            return false; // not a prefix of this creator's history
         else
            ++len;
      }
      cut.push_back(len);
   }
   return check_consistent_cut(views, cut);
}

CheckResult check_global_state(const RunResult& r) {
   for (const auto* n : honest(r)) {
      GlobalState gs;
      try {
         gs = n->estimate_global_state();
      } catch (const NodeError& e) {
         return fail("global_state_cut", e.what());
      }
      // With forks a creator's history is no longer one sequence, so only closure applies.
      const auto& chain  = n->chain();
      bool        forked = false;
      for (NodeId c : chain.creators()) {
         auto list = chain.by_creator(c);
         forked    = forked || chain.event(list.back()).seq + 1 != list.size();
      }
      if (forked ? !is_ancestor_closed(chain, gs.events) : !global_state_is_cut(chain, gs))
         return fail("global_state_cut", "node " + std::to_string(n->id().value) + " estimate is not closed");
   }
   return {"global_state_cut", true, ""};
}

CheckResult check_theorems(const RunResult& r) {
   auto hs = honest(r);
   if (hs.empty())
      return {"layering_theorems", true, ""};
   const auto& chain     = hs[0]->chain();
   bool        fork_free = chain.detect_forks().empty();
   std::size_t W         = fork_free ? r.config.n : max_width_ceil({r.config.n, r.config.w_p, r.config.w_c});
   auto        rep       = check_equivalence(chain, W);
   if (!rep.equal)
      return fail("layering_theorems", "LPL/CG(W=" + std::to_string(W) + ") differ at " +
                                           rep.counterexample->short_hex());
   if (fork_free && rep.lpl_width > r.config.n)
      return fail("layering_theorems", "fork-free width " + std::to_string(rep.lpl_width) + " > n");
   return {"layering_theorems", true, "W=" + std::to_string(W) + " width=" + std::to_string(rep.lpl_width)};
}

TxStats tx_stats(const RunResult& r, std::uint64_t before_step) {
   TxStats s;
   for (const auto* n : honest(r)) {
      s.regressions += n->stage_regressions();
      for (const auto& [tx, st] : n->transactions()) {
         if (n->tx_submitted_step(tx) >= before_step)
            continue;
         ++s.submitted;
         if (st.stage == Stage::Finalized)
            ++s.finalized;
      }
   }
   return s;
}

std::vector<CheckResult> check_run(const RunResult& r) {
   std::vector<CheckResult> out{check_chains(r),      check_root_frame_agreement(r), check_order_agreement(r),
                                check_fork_exclusion(r), check_incremental_batch(r),  check_buffers_empty(r),
                                check_global_state(r)};
   out.push_back(check_theorems(r));
   auto tx = tx_stats(r, r.config.steps / 3);
   std::ostringstream d;
   d << tx.finalized << "/" << tx.submitted << " regressions=" << tx.regressions;
   out.push_back({"tx_finalized", tx.ratio() >= 0.95 && tx.regressions == 0, d.str()});
   return out;
}

std::string format_report(const RunResult& r, const std::vector<CheckResult>& checks) {
   std::map<std::string, std::string> kv;
   std::istringstream                 manifest(r.config.manifest());
   std::string                        line;
   while (std::getline(manifest, line)) {
      auto eq = line.find('=');
      kv["config." + line.substr(0, eq)] = line.substr(eq + 1);
   }
   kv["run.steps_run"]        = std::to_string(r.steps_run);
   kv["run.drain_rounds"]     = std::to_string(r.drain_rounds);
   kv["run.messages_sent"]    = std::to_string(r.messages_sent);
   kv["run.messages_dropped"] = std::to_string(r.messages_dropped);
   kv["run.trace_digest"]     = hex_digest([&] {
      std::string all;
      for (const auto& t : r.trace)
         all += t + '\n';
      return all;
   }());
   for (const auto& n : r.nodes) {
      std::string p   = "node." + std::to_string(n.id().value) + ".";
      const auto& fo  = n.final_order();
      std::string mc;
      for (const auto& id : fo.main_chain)
         mc += id.hex();
      std::size_t q = 0;
      for (Index i = 0; i < n.chain().size(); ++i)
         q += n.quarantined(i);
      kv[p + "behavior"]          = to_string(n.config().behavior);
      kv[p + "events"]            = std::to_string(n.chain().size());
      kv[p + "height"]            = std::to_string(n.layering().height());
      kv[p + "max_frame"]         = std::to_string(n.roots().max_frame());
      kv[p + "decided_frames"]    = std::to_string(n.finality().decided_frames());
      kv[p + "ordered"]           = std::to_string(fo.ordered.size());
      kv[p + "excluded_atropos"]  = std::to_string(fo.excluded_atropos);
      kv[p + "quarantined"]       = std::to_string(q);
      kv[p + "main_chain_digest"] = hex_digest(mc);
   }
   for (const auto& c : checks) {
      kv["check." + c.name] = c.ok ? "PASS" : "FAIL";
      if (!c.detail.empty())
         kv["check." + c.name + ".detail"] = c.detail;
   }
   std::ostringstream out;
   for (const auto& [k, v] : kv)
      out << k << "=" << v << '\n';
   return out.str();
}

} // namespace onlay
