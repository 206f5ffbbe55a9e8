#include "onlay/checks.hpp"
#include "onlay/dag_io.hpp"
#include "onlay/simnet.hpp"
#include "onlay/snapshot.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace onlay;

namespace {

constexpr const char* kVersion = "onlay 0.1.0";

enum Exit { kOk = 0, kOracleFailure = 1, kUsage = 2 };

struct RunFlags {
   std::size_t   nodes{4};
   std::size_t   k{0};
   std::uint64_t steps{100};
   std::uint64_t seed{0};
   std::string   strategy{"random"};
   std::string   algo{"olpl"};
   std::size_t   width{0};
   std::string   byzantine;
   double        wp{0.5};
   std::size_t   wc{1};
   std::string   delay{"lockstep"};
   std::string   out{"onlay-out"};
};

SimConfig make_config(const RunFlags& f) {
   SimConfig c;
   c.n     = f.nodes;
   c.k     = f.k;
   c.steps = f.steps;
   c.seed  = f.seed;
   if (const char* env = std::getenv("ONLAY_SEED"); env && *env) {
      try {
         c.seed = std::stoull(env);
      } catch (const std::exception&) {
         throw ConfigError(std::string("ONLAY_SEED is not an integer: ") + env);
      }
   }
   auto s = parse_strategy(f.strategy);
   if (!s)
      throw ConfigError("unknown strategy `" + f.strategy + "`");
   c.strategy = *s;
   if (f.algo == "lpl" || f.algo == "olpl")
      c.algo = LayeringAlgo::OLpl;
   else if (f.algo == "cg" || f.algo == "ocg")
      c.algo = LayeringAlgo::OCg;
   else
      throw ConfigError("unknown algo `" + f.algo + "`");
   c.cg_width  = f.width;
   c.byzantine = parse_byzantine(f.byzantine);
   c.w_p       = f.wp;
   c.w_c       = f.wc;
   auto d      = parse_delay(f.delay);
   if (!d)
      throw ConfigError("unknown delay model `" + f.delay + "`");
   c.delay = *d;
   c.validate();
   return c;
}

std::string digest_of(const std::string& s) {
   return to_hex(sha256({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}));
}

struct Artifacts {
   std::string              manifest;
   std::vector<std::string> snapshots;
   std::string              trace;
   std::string              report;
};

Artifacts render(const RunResult& r, const std::vector<CheckResult>& checks) {
   Artifacts a;
   a.manifest = r.config.manifest() + "artifact.report=report.txt\nartifact.snapshots=snapshots/\n"
                "artifact.trace=trace.txt\nversion=" + kVersion + "\n";
   for (const auto& n : r.nodes)
      a.snapshots.push_back(format_snapshot(take_snapshot(n)));
   for (const auto& t : r.trace)
      a.trace += t + '\n';
   a.report = format_report(r, checks);
   return a;
}

std::string snapshot_name(std::size_t i) { return "node-" + std::to_string(i) + ".snap"; }

void write_file(const fs::path& p, const std::string& body) {
   std::ofstream out(p, std::ios::binary);
   if (!out)
      throw std::runtime_error("cannot write " + p.string());
   out << body;
}

std::string read_file(const fs::path& p) {
   std::ifstream in(p, std::ios::binary);
   if (!in)
      throw std::runtime_error("cannot read " + p.string());
   std::ostringstream s;
   s << in.rdbuf();
   return s.str();
}

void print_summary(const RunResult& r, const std::vector<CheckResult>& checks) {
   std::cout << std::left << std::setw(6) << "node" << std::setw(13) << "behavior" << std::setw(8) << "events"
             << std::setw(8) << "height" << std::setw(8) << "frames" << std::setw(9) << "decided" << "ordered\n";
   for (const auto& n : r.nodes)
      std::cout << std::setw(6) << n.id().value << std::setw(13) << to_string(n.config().behavior) << std::setw(8)
                << n.chain().size() << std::setw(8) << n.layering().height() << std::setw(8)
                << n.roots().max_frame() << std::setw(9) << n.finality().decided_frames()
                << n.final_order().ordered.size() << '\n';
   for (const auto& c : checks)
      std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
}

int cmd_run(const RunFlags& f) {
   auto cfg    = make_config(f);
   auto result = run(cfg);
   auto checks = check_run(result);
   auto art    = render(result, checks);

   fs::path out(f.out);
   fs::create_directories(out / "snapshots");
   write_file(out / "manifest.txt", art.manifest);
   write_file(out / "trace.txt", art.trace);
   write_file(out / "report.txt", art.report);
   std::string all_snaps;
   for (std::size_t i = 0; i < art.snapshots.size(); ++i) {
      write_file(out / "snapshots" / snapshot_name(i), art.snapshots[i]);
      all_snaps += art.snapshots[i];
   }
   print_summary(result, checks);
   std::cout << "digest.report=" << digest_of(art.report) << '\n'
             << "digest.snapshots=" << digest_of(all_snaps) << '\n'
             << "digest.trace=" << digest_of(art.trace) << '\n';
   bool ok = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.ok; });
   return ok ? kOk : kOracleFailure;
}

// A chain file holds event records; a snapshot's stage section is ignored.
OperaChain load_chain(const std::string& path) {
   std::ifstream in(path);
   if (!in)
      throw std::runtime_error("cannot read " + path);
   std::vector<std::string> lines;
   std::string              line;
   while (std::getline(in, line) && line != "stage")
      lines.push_back(line);
   return read_dag_lines(lines, 1, true);
}

std::size_t creator_count(const OperaChain& chain) { return std::max<std::size_t>(1, chain.creators().size()); }

Layering layer_with(const OperaChain& chain, const std::string& algo, std::size_t width) {
   auto dag = DagView::from_chain(chain);
   if (algo == "lpl")
      return layer_lpl(dag);
   if (algo == "cg")
      return layer_cg(transitive_reduce(dag), width);
   if (algo == "olpl" || algo == "ocg") {
      LayeringState state;
      auto          src = algo == "ocg" ? transitive_reduce(dag) : dag;
      for (Vertex v = 0; v < src.size(); ++v) {
         auto diff = single_vertex_diff(src, v);
         if (algo == "ocg")
            layer_cg_online(state, width, diff);
         else
            layer_lpl_online(state, diff);
      }
      return state.layering;
   }
   throw ConfigError("unknown algo `" + algo + "`");
}

std::vector<EventId> ids_of(const OperaChain& chain) {
   std::vector<EventId> ids;
   for (const auto& e : chain.events())
      ids.push_back(e.id);
   return ids;
}

int cmd_layer(const std::string& file, const std::string& algo, std::size_t width, const std::string& dot) {
   auto chain = load_chain(file);
   if (width == 0)
      width = creator_count(chain);
   auto lay = layer_with(chain, algo, width);
   std::cout << dump_layering(lay, DagView::from_chain(chain), ids_of(chain));
   if (!dot.empty())
      write_file(dot, layering_dot(chain, lay));
   return kOk;
}

int cmd_roots(const std::string& file, std::size_t n) {
   auto chain = load_chain(file);
   if (n == 0)
      n = creator_count(chain);
   auto lay = layer_lpl(DagView::from_chain(chain));
   auto rg  = build_root_graph(chain, lay, n);
   std::cout << format_roots(chain, rg, assign_root_frames(chain, rg, n));
   return kOk;
}

int cmd_finality(const std::string& file, std::size_t n, std::uint32_t gap) {
   auto chain = load_chain(file);
   if (n == 0)
      n = creator_count(chain);
   auto               lay = layer_lpl(DagView::from_chain(chain));
   RootGraphBuilder   roots(n);
   std::vector<Index> all(chain.size());
   for (Index i = 0; i < all.size(); ++i)
      all[i] = i;
   roots.extend(chain, lay, all);
   FinalityEngine engine(n, gap);
   engine.advance(chain, lay, roots);
   std::cout << format_final_order(chain, lay, roots.seen_frames(), engine);
   return kOk;
}

int cmd_export_dot(const std::string& file, bool root_graph, const std::string& out) {
   auto        chain = load_chain(file);
   auto        lay   = layer_lpl(DagView::from_chain(chain));
   std::string dot;
   if (root_graph) {
      auto n  = creator_count(chain);
      auto rg = build_root_graph(chain, lay, n);
      dot     = root_graph_dot(chain, lay, rg, assign_root_frames(chain, rg, n));
   } else {
      dot = layering_dot(chain, lay);
   }
   if (out.empty())
      std::cout << dot;
   else
      write_file(out, dot);
   return kOk;
}

std::vector<fs::path> snapshot_files(const fs::path& dir) {
   std::vector<fs::path> out;
   for (const auto& base : {dir / "snapshots", dir}) {
      if (!fs::is_directory(base))
         continue;
      for (const auto& entry : fs::directory_iterator(base))
         if (entry.path().extension() == ".snap")
            out.push_back(entry.path());
      if (!out.empty())
         break;
   }
   std::sort(out.begin(), out.end());
   return out;
}

int cmd_verify(const std::string& dir) {
   auto files = snapshot_files(dir);
   if (files.empty()) {
      std::cerr << "verify: no snapshots (*.snap) found in " << dir << '\n';
      return kUsage;
   }
   std::vector<Snapshot> snaps;
   for (const auto& f : files) {
      std::ifstream in(f);
      try {
         snaps.push_back(parse_snapshot(in));
      } catch (const ParseError& e) {
         std::cerr << "verify: corrupt snapshot " << f.string() << ": " << e.what() << '\n';
         return kUsage;
      }
   }
   std::optional<SimConfig> cfg;
   if (fs::exists(fs::path(dir) / "manifest.txt")) {
      std::ifstream in(fs::path(dir) / "manifest.txt");
      cfg = parse_manifest(in);
   }

   std::map<std::string, std::string> kv;
   bool                               all_ok = true;
   auto put = [&](const std::string& name, bool ok, const std::string& detail) {
      kv["check." + name] = ok ? "PASS" : "FAIL";
      if (!detail.empty())
         kv["check." + name + ".detail"] = detail;
      all_ok = all_ok && ok;
   };

   std::vector<const Snapshot*> honest;
   for (const auto& s : snaps) {
      kv["integrity.node." + std::to_string(s.node.value)] =
         s.integrity.empty() ? "ok" : std::to_string(s.integrity.size()) + " issues: " + s.integrity.front();
      if (s.behavior == Behavior::Honest)
         honest.push_back(&s);
   }

   {
      std::vector<std::vector<EventBlock>> views;
      for (const auto* s : honest)
         views.push_back(s->events);
      auto v = check_consistent_chains(views);
      if (v.empty())
         put("consistent_chains", true, "");
      else
         put("consistent_chains", false,
             "node " + std::to_string(honest[v[0].a]->node.value) + "/" + std::to_string(honest[v[0].b]->node.value) +
                " offending event " + v[0].event.hex() + " (" + v[0].reason + ")");
   }
   {
      std::string bad;
      for (std::size_t i = 1; i < honest.size() && bad.empty(); ++i)
         for (const auto& [id, rec] : honest[0]->vertices) {
            auto it = honest[i]->vertices.find(id);
            if (it != honest[i]->vertices.end() && !(it->second == rec)) {
               bad = "event " + id.hex();
               break;
            }
         }
      put("root_frame_agreement", bad.empty(), bad);
   }
   {
      bool same = true;
      for (const auto* s : honest)
         same = same && s->order == honest.front()->order;
      put("finality_agreement", same, honest.empty() ? "" : "ordered=" + std::to_string(honest.front()->order.size()));
   }
   {
      std::string bad;
      for (const auto* s : honest) {
         if (!s->integrity.empty())
            continue;
         auto                        chain = chain_of(*s);
         std::set<EventId>           ordered(s->order.begin(), s->order.end());
         for (const auto& [x, y] : chain.detect_forks())
            if (ordered.contains(x) && ordered.contains(y))
               bad = "node " + std::to_string(s->node.value) + " finalized fork pair " + x.hex();
      }
      put("fork_exclusion", bad.empty(), bad);
   }
   {
      std::string bad, note;
      for (const auto& s : snaps) {
         if (!s.integrity.empty())
            continue;
         auto chain     = chain_of(s);
         auto n         = cfg ? cfg->n : creator_count(chain);
         bool fork_free = chain.detect_forks().empty();
         if (!fork_free && !cfg) {
            note = "forked chains skipped (no manifest)";
            continue;
         }
         std::size_t W   = fork_free ? n : max_width_ceil({n, cfg->w_p, cfg->w_c});
         auto        rep = check_equivalence(chain, W);
         if (!rep.equal)
            bad = "node " + std::to_string(s.node.value) + " LPL/CG differ at " + rep.counterexample->hex();
         else if (fork_free && rep.lpl_width > n)
            bad = "node " + std::to_string(s.node.value) + " width " + std::to_string(rep.lpl_width) + " > n";
      }
      put("layering_theorems", bad.empty(), bad.empty() ? note : bad);
   }
   for (const auto& [k, v] : kv)
      std::cout << k << "=" << v << '\n';
   return all_ok ? kOk : kOracleFailure;
}

int cmd_replay(const std::string& dir) {
   fs::path      base(dir);
   std::ifstream in(base / "manifest.txt");
   if (!in) {
      std::cerr << "replay: no manifest.txt in " << dir << '\n';
      return kUsage;
   }
   auto cfg    = parse_manifest(in);
   auto result = run(cfg);
   auto art    = render(result, check_run(result));

   bool ok      = true;
   auto compare = [&](const std::string& name, const std::string& fresh, const fs::path& stored) {
      bool same = fs::exists(stored) && read_file(stored) == fresh;
      std::cout << "replay." << name << "=" << (same ? "match" : "differ") << '\n';
      ok = ok && same;
   };
   compare("report", art.report, base / "report.txt");
   for (std::size_t i = 0; i < art.snapshots.size(); ++i)
      compare("snapshot." + std::to_string(i), art.snapshots[i], base / "snapshots" / snapshot_name(i));
   compare("trace", art.trace, base / "trace.txt");
   return ok ? kOk : kOracleFailure;
}

} // namespace

int main(int argc, char** argv) {
   CLI::App app{"Online layering consensus simulator and DAG tools"};
   app.set_version_flag("--version", kVersion);
   app.require_subcommand(1);

   RunFlags rf;
   auto*    run_cmd = app.add_subcommand("run", "Simulate a network, write artifacts and a verification report");
   run_cmd->add_option("--nodes", rf.nodes, "Number of nodes n");
   run_cmd->add_option("--k", rf.k, "Refs per event (self + k-1 peers); default min(3, n)");
   run_cmd->add_option("--steps", rf.steps, "Scheduler steps before the drain phase");
   run_cmd->add_option("--seed", rf.seed, "Master seed (ONLAY_SEED overrides)");
   run_cmd->add_option("--strategy", rf.strategy, "Peer selection: random|least|most|fair|smart");
   run_cmd->add_option("--algo", rf.algo, "Layering: lpl|olpl (O-LPL), cg|ocg (adds the O-CG overlay)");
   run_cmd->add_option("--width", rf.width, "O-CG width; 0 means ceil(W_max)");
   run_cmd->add_option("--byzantine", rf.byzantine, "Faulty nodes, e.g. 2:forker,3:equivocator");
   run_cmd->add_option("--wp", rf.wp, "Fork probability per event of a faulty node");
   run_cmd->add_option("--wc", rf.wc, "Extra siblings per fork");
   run_cmd->add_option("--delay", rf.delay, "lockstep | rand:<max> | reorder | drop:<p>");
   run_cmd->add_option("--out", rf.out, "Artifact directory");

   std::string file, algo = "lpl", dot, out, dir;
   std::size_t width = 0, n = 0;
   std::uint32_t gap = kClothoGap;
   bool          root_graph = false;

   auto* layer_cmd = app.add_subcommand("layer", "Print the layering of a chain file");
   layer_cmd->add_option("file", file, "Chain or snapshot file")->required();
   layer_cmd->add_option("--algo", algo, "lpl|cg|olpl|ocg");
   layer_cmd->add_option("--width", width, "CG width; 0 means the number of creators");
   layer_cmd->add_option("--out", dot, "Also write the layering as DOT");

   auto* roots_cmd = app.add_subcommand("roots", "Print root sets per frame");
   roots_cmd->add_option("file", file, "Chain or snapshot file")->required();
   roots_cmd->add_option("--nodes", n, "Number of nodes; default the number of creators");

   auto* fin_cmd = app.add_subcommand("finality", "Print the final order of a chain file");
   fin_cmd->add_option("file", file, "Chain or snapshot file")->required();
   fin_cmd->add_option("--nodes", n, "Number of nodes; default the number of creators");
   fin_cmd->add_option("--gap", gap, "Frames between a candidate and its nominator");

   auto* verify_cmd = app.add_subcommand("verify", "Check the snapshots of a run directory");
   verify_cmd->add_option("dir", dir, "Run directory or snapshot directory")->required();

   auto* dot_cmd = app.add_subcommand("export-dot", "Export a chain as DOT");
   dot_cmd->add_option("file", file, "Chain or snapshot file")->required();
   dot_cmd->add_flag("--roots", root_graph, "Export the root graph instead of the layering");
   dot_cmd->add_option("--out", out, "Output file; default stdout");

   auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and compare artifacts");
   replay_cmd->add_option("dir", dir, "Run directory")->required();

   try {
      app.parse(argc, argv);
   } catch (const CLI::ParseError& e) {
      int code = app.exit(e);
      return code == 0 ? kOk : kUsage;
   }

   try {
      if (*run_cmd)
         return cmd_run(rf);
      if (*layer_cmd)
         return cmd_layer(file, algo, width, dot);
      if (*roots_cmd)
         return cmd_roots(file, n);
      if (*fin_cmd)
         return cmd_finality(file, n, gap);
      if (*verify_cmd)
         return cmd_verify(dir);
      if (*dot_cmd)
         return cmd_export_dot(file, root_graph, out);
      if (*replay_cmd)
         return cmd_replay(dir);
   } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kUsage;
   } catch (const ParseError& e) {
      std::cerr << "parse error: " << e.what() << '\n';
      return kUsage;
   } catch (const LayeringError& e) {
      std::cerr << "layering error: " << e.what() << '\n';
      return kUsage;
   } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kOracleFailure;
   }
   return kUsage;
}
