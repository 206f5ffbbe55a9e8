// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "support.hpp"

#include "onlay/checks.hpp"
#include "onlay/layering.hpp"
#include "onlay/simnet.hpp"
#include "onlay/snapshot.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

using namespace onlay;

namespace {

// Pinned parameters and tolerances.
constexpr std::size_t   kChains            = 1000;
constexpr std::size_t   kMaxEvents         = 200;
constexpr double        kLayeringSeconds   = 30.0;
constexpr std::uint64_t kSteps             = 300;
constexpr std::size_t   kHonestSeeds       = 50;
constexpr double        kConsistencySecs   = 120.0;
constexpr std::size_t   kForkSeeds         = 50;
constexpr std::size_t   kPrefixSeeds       = 20;
constexpr std::uint64_t kLongSteps         = 400;
constexpr double        kMinFinalizedRatio = 0.95;
constexpr std::size_t   kMaxRegressions    = 0;
constexpr std::uint64_t kChainSeedBase     = 0xacce97;

const char* const kDelayModels[] = {"lockstep", "rand:3", "reorder", "drop:0.1"};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
   return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
   int         id;
   std::string title;
   bool        ok{true};
   std::string detail;
};

void print(const Line& l) {
   std::cout << "criterion " << l.id << ": " << (l.ok ? "PASS" : "FAIL") << "  " << l.title << "  [" << l.detail
             << "]" << std::endl;
}

SimConfig make_config(std::size_t n, std::uint64_t steps, std::uint64_t seed, const char* delay = "lockstep") {
   SimConfig c;
   c.n            = n;
   c.steps        = steps;
   c.seed         = seed;
   c.delay        = *parse_delay(delay);
   c.record_trace = false;
   return c;
}

std::vector<EventBlock> corpus_chain(std::size_t i) {
   Rng             rng(derive_seed(kChainSeedBase, {i}));
   test::GenParams p;
   p.n         = 3 + rng.below(6);
   p.events    = 1 + rng.below(kMaxEvents);
   p.k         = 2 + rng.below(p.n - 1);
   p.tops_only = rng.chance(0.5);
   return test::random_chain(rng, p);
}

Line criterion1() {
   Line        l{1, "LPL matches the longest-path oracle, edge span holds", true, ""};
   std::size_t mismatches = 0, span = 0, vertices = 0;
   auto        t0         = Clock::now();
   for (std::size_t i = 0; i < kChains; ++i) {
      auto events = corpus_chain(i);
      auto chain  = test::to_chain(events);
      auto dag    = DagView::from_chain(chain);
      auto lay    = layer_lpl(dag);
      auto oracle = test::longest_path_oracle(test::ref_map(events));
      for (Vertex v = 0; v < dag.size(); ++v) {
         ++vertices;
         if (lay.layer_of(v) != oracle.at(chain.event(v).id))
            ++mismatches;
         for (Vertex p : dag.parents[v])
            if (lay.layer_of(v) < lay.layer_of(p) + 1)
               ++span;
      }
   }
   double secs = seconds_since(t0);
   l.ok        = mismatches == 0 && span == 0 && secs < kLayeringSeconds;
   std::ostringstream d;
   d << kChains << " chains, " << vertices << " vertices, " << mismatches << " mismatches, " << span
     << " span violations, " << secs << " s (limit " << kLayeringSeconds << " s)";
   l.detail = d.str();
   return l;
}

Line criterion2() {
   Line        l{2, "O-LPL == LPL and O-CG == CG(W=ceil(W_max)) on event streams", true, ""};
   std::size_t lpl_bad = 0, cg_bad = 0;
   for (std::size_t i = 0; i < kChains; ++i) {
      auto chain = test::to_chain(corpus_chain(i));
      auto dag   = DagView::from_chain(chain);
      auto red   = transitive_reduce(dag);
      // the corpus is fork-free, so W_max = n
      std::size_t   W = max_width_ceil({chain.creators().size(), 0.0, 0});
      LayeringState lpl, cg;
      for (Vertex v = 0; v < dag.size(); ++v) {
         layer_lpl_online(lpl, single_vertex_diff(dag, v));
         layer_cg_online(cg, W, single_vertex_diff(red, v));
      }
      lpl_bad += !(lpl.layering == layer_lpl(dag));
      cg_bad += !(cg.layering == layer_cg(red, W));
   }
   l.ok     = lpl_bad == 0 && cg_bad == 0;
   l.detail = std::to_string(kChains) + " streams, O-LPL mismatches " + std::to_string(lpl_bad) +
              ", O-CG mismatches " + std::to_string(cg_bad);
   return l;
}

Line criterion3() {
   Line               l{3, "LPL == CG(reduce, W) on harness chains; fork-free width <= n", true, ""};
   std::ostringstream d;
   std::size_t        checked = 0, bad = 0, max_free_width = 0, max_fork_width = 0;
   for (std::size_t n : {4u, 5u, 7u})
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
         auto r = run(make_config(n, kSteps, seed));
         for (const auto& node : r.nodes) {
            auto rep = check_equivalence(node.chain(), n);
            ++checked;
            max_free_width = std::max(max_free_width, rep.lpl_width);
            if (!rep.equal || rep.lpl_width > n)
               ++bad;
         }
         auto cfg      = make_config(n, kSteps, seed);
         cfg.w_p       = 1.0;
         cfg.w_c       = 1;
         cfg.byzantine = {{NodeId{static_cast<std::uint32_t>(n - 1)}, Behavior::Forker}};
         if (n == 7)
            cfg.byzantine[NodeId{2}] = Behavior::Forker;
         std::size_t W = max_width_ceil({n, cfg.w_p, cfg.w_c});
         auto        f = run(cfg);
         for (NodeId h : cfg.honest_nodes()) {
            const auto& chain = f.nodes[h.value].chain();
            auto        rep   = check_equivalence(chain, W);
            ++checked;
            max_fork_width = std::max(max_fork_width, rep.lpl_width);
            if (!rep.equal || chain.detect_forks().empty())
               ++bad;
         }
      }
   l.ok = bad == 0;
   d << checked << " node chains over n=4,5,7, " << bad << " failures, max fork-free width " << max_free_width
     << ", max forked width " << max_fork_width;
   l.detail = d.str();
   return l;
}

// Criteria 4, 8 and 9 share the honest runs.
std::vector<Line> honest_runs() {
   Line        c4{4, "honest runs: consistent chains, root/frame agreement, identical orders", true, ""};
   Line        c8{8, "global-state estimates pass check_consistent_cut on every node", true, ""};
   Line        c9{9, "early transactions finalize, no stage regressions", true, ""};
   std::size_t runs = 0, bad4 = 0, bad8 = 0, bad9 = 0, regressions = 0;
   double      min_ratio = 1.0;
   std::string first_failure;
   auto        t0 = Clock::now();
   for (const char* delay : kDelayModels)
      for (std::uint64_t seed = 0; seed < kHonestSeeds; ++seed) {
         auto r = run(make_config(5, kSteps, seed, delay));
         ++runs;
         for (const auto& c : {check_chains(r), check_root_frame_agreement(r), check_order_agreement(r)})
            if (!c.ok) {
               ++bad4;
               if (first_failure.empty())
                  first_failure = std::string(delay) + "/" + std::to_string(seed) + " " + c.name + ": " + c.detail;
            }
         if (!check_global_state(r).ok)
            ++bad8;
         auto tx   = tx_stats(r, kSteps / 3);
         min_ratio = std::min(min_ratio, tx.ratio());
         regressions += tx.regressions;
         if (tx.ratio() < kMinFinalizedRatio || tx.regressions > kMaxRegressions)
            ++bad9;
      }
   double secs = seconds_since(t0);
   c4.ok       = bad4 == 0 && secs < kConsistencySecs;
   std::ostringstream d4;
   d4 << runs << " runs (n=5, " << kSteps << " steps, 4 delay models), " << bad4 << " failed checks, " << secs
      << " s (limit " << kConsistencySecs << " s)";
   if (!first_failure.empty())
      d4 << ", first: " << first_failure;
   c4.detail = d4.str();
   c8.ok     = bad8 == 0;
   c8.detail = std::to_string(runs * 5) + " node estimates, " + std::to_string(bad8) + " runs failing";
   c9.ok     = bad9 == 0;
   std::ostringstream d9;
   d9 << "min finalized ratio " << min_ratio << " (need >= " << kMinFinalizedRatio << "), " << regressions
      << " regressions";
   c9.detail = d9.str();
   return {c4, c8, c9};
}

Line criterion5() {
   Line        l{5, "n=7 with 2 forkers: no fork pair finalized, honest orders identical", true, ""};
   std::size_t bad = 0, excluded = 0;
   std::string first_failure;
   for (std::uint64_t seed = 0; seed < kForkSeeds; ++seed) {
      auto cfg      = make_config(7, kSteps, seed);
      cfg.w_p       = 1.0;
      cfg.w_c       = 1;
      cfg.byzantine = {{NodeId{2}, Behavior::Forker}, {NodeId{5}, Behavior::Forker}};
      auto r        = run(cfg);
      for (const auto& c : {check_fork_exclusion(r), check_order_agreement(r)})
         if (!c.ok) {
            ++bad;
            if (first_failure.empty())
               first_failure = std::to_string(seed) + " " + c.name + ": " + c.detail;
         }
      excluded += r.nodes[0].final_order().excluded_atropos;
   }
   l.ok     = bad == 0;
   l.detail = std::to_string(kForkSeeds) + " runs, " + std::to_string(bad) + " failed checks, " +
              std::to_string(excluded) + " Atropos excluded on node 0" +
              (first_failure.empty() ? "" : ", first: " + first_failure);
   return l;
}

std::vector<EventId> order_ids(const Node& node) {
   std::vector<EventId> out;
   for (Index i : node.final_order().ordered)
      out.push_back(node.chain().event(i).id);
   return out;
}

Line criterion6() {
   Line        l{6, "the 300-step order is a prefix of the 400-step order", true, ""};
   std::size_t bad = 0, shortest = SIZE_MAX;
   for (std::uint64_t seed = 0; seed < kPrefixSeeds; ++seed) {
      auto a = run(make_config(5, kSteps, seed));
      auto b = run(make_config(5, kLongSteps, seed));
      for (std::size_t i = 0; i < a.nodes.size(); ++i) {
         auto x = order_ids(a.nodes[i]), y = order_ids(b.nodes[i]);
         shortest = std::min(shortest, x.size());
         if (x.size() > y.size() || !std::equal(x.begin(), x.end(), y.begin()))
            ++bad;
      }
   }
   l.ok     = bad == 0;
   l.detail = std::to_string(kPrefixSeeds) + " seeds x 5 nodes, " + std::to_string(bad) +
              " non-prefix orders, shortest 300-step order " + std::to_string(shortest);
   return l;
}

std::string run_digest(const SimConfig& cfg) {
   auto        r = run(cfg);
   std::string all;
   for (const auto& node : r.nodes)
      all += format_snapshot(take_snapshot(node));
   for (const auto& line : r.trace)
      all += line + "\n";
   all += format_report(r, check_run(r));
   auto d = sha256({reinterpret_cast<const std::uint8_t*>(all.data()), all.size()});
   return to_hex(d);
}

Line criterion7() {
   Line l{7, "repeated runs give byte-identical snapshots, traces and reports", true, ""};
   std::vector<SimConfig> cfgs;
   cfgs.push_back(make_config(4, 150, 1));
   cfgs.push_back(make_config(5, 150, 2, "rand:3"));
   cfgs.back().byzantine = {{NodeId{1}, Behavior::Forker}};
   cfgs.back().w_p       = 0.5;
   cfgs.back().w_c       = 1;
   cfgs.push_back(make_config(4, 150, 3, "drop:0.1"));
   cfgs.back().byzantine = {{NodeId{0}, Behavior::Equivocator}};
   cfgs.back().w_p       = 1.0;
   cfgs.back().w_c       = 1;
   std::size_t bad = 0;
   std::string sample;
   for (auto& c : cfgs) {
      c.record_trace = true;
      auto first     = run_digest(c);
      if (run_digest(c) != first)
         ++bad;
      if (sample.empty())
         sample = first.substr(0, 16);
   }
   l.ok     = bad == 0;
   l.detail = std::to_string(cfgs.size()) + " configs run twice, " + std::to_string(bad) + " digest mismatches, e.g. " +
              sample;
   return l;
}

} // namespace

int main() {
   std::vector<Line> lines;
   auto              record = [&](Line l) {
      print(l);
      lines.push_back(std::move(l));
   };
   record(criterion1());
   record(criterion2());
   record(criterion3());
   auto honest = honest_runs();
   record(honest[0]);
   record(criterion5());
   record(criterion6());
   record(criterion7());
   record(honest[1]);
   record(honest[2]);

   bool all = std::all_of(lines.begin(), lines.end(), [](const Line& l) { return l.ok; });
   std::cout << (all ? "ALL PASS" : "SOME FAILED") << std::endl;
   return all ? 0 : 1;
}
