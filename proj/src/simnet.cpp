#include "onlay/simnet.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <sstream>

namespace onlay {

namespace {
enum : std::uint64_t { kTransportStream = 11, kReorderStream = 12 };

std::string fmt_double(double v) {
   std::ostringstream out;
   out << v;
   return out.str();
}
} // namespace

std::string DelayModel::str() const {
   switch (kind) {
   case DelayKind::Lockstep: return "lockstep";
   case DelayKind::Random: return "rand:" + std::to_string(max_delay);
   case DelayKind::Reorder: return "reorder";
   case DelayKind::Drop: return "drop:" + fmt_double(drop_p);
   }
   return "?";
}

std::optional<DelayModel> parse_delay(std::string_view s) {
   DelayModel m;
   if (s == "lockstep")
      return m;
   if (s == "reorder") {
      m.kind = DelayKind::Reorder;
      return m;
   }
   auto colon = s.find(':');
   if (colon == std::string_view::npos)
      return std::nullopt;
   auto head = s.substr(0, colon);
   auto arg  = std::string(s.substr(colon + 1));
   if (head == "rand") {
      m.kind     = DelayKind::Random;
      auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), m.max_delay);
      if (ec != std::errc{} || p != arg.data() + arg.size() || arg.empty())
         return std::nullopt;
      return m;
   }
   if (head == "drop") {
      m.kind = DelayKind::Drop;
      try {
         std::size_t used = 0;
         m.drop_p         = std::stod(arg, &used);
         if (used != arg.size() || m.drop_p < 0.0 || m.drop_p >= 1.0)
            return std::nullopt;
      } catch (const std::exception&) {
         return std::nullopt;
      }
      return m;
   }
   return std::nullopt;
}

Behavior SimConfig::behavior(NodeId id) const {
   auto it = byzantine.find(id);
   return it == byzantine.end() ? Behavior::Honest : it->second;
}

std::vector<NodeId> SimConfig::honest_nodes() const {
   std::vector<NodeId> out;
   for (std::uint32_t i = 0; i < n; ++i)
      if (honest(NodeId{i}))
         out.push_back(NodeId{i});
   return out;
}

void SimConfig::validate() const {
   if (n < 2)
      throw ConfigError("n must be at least 2 (a node needs peers to sync with)");
   if (effective_k() < 1 || effective_k() > n)
      throw ConfigError("k must lie in [1, n]");
   for (const auto& [id, b] : byzantine)
      if (id.value >= n)
         throw ConfigError("byzantine node " + std::to_string(id.value) + " out of range");
   if (w_p < 0.0 || w_p > 1.0)
      throw ConfigError("w_p must lie in [0, 1]");
   if (w_c > 250)
      throw ConfigError("w_c too large");
   if (algo == LayeringAlgo::OCg && cg_width == 0 && max_width_ceil({n, w_p, w_c}) == 0)
      throw ConfigError("invalid CG width");
}

std::string SimConfig::manifest() const {
   std::map<std::string, std::string> kv;
   kv["n"]           = std::to_string(n);
   kv["k"]           = std::to_string(effective_k());
   kv["steps"]       = std::to_string(steps);
   kv["seed"]        = std::to_string(seed);
   kv["w_p"]         = fmt_double(w_p);
   kv["w_c"]         = std::to_string(w_c);
   kv["delay"]       = delay.str();
   kv["strategy"]    = to_string(strategy);
   kv["algo"]        = algo == LayeringAlgo::OLpl ? "olpl" : "ocg";
   kv["width"]       = std::to_string(cg_width);
   kv["tx_per_step"] = std::to_string(tx_per_step);
   kv["clotho_gap"]  = std::to_string(clotho_gap);
   std::string byz;
   for (const auto& [id, b] : byzantine)
      byz += (byz.empty() ? "" : ",") + std::to_string(id.value) + ":" + to_string(b);
   kv["byzantine"] = byz.empty() ? "-" : byz;
   std::ostringstream out;
   for (const auto& [k, v] : kv)
      out << k << "=" << v << '\n';
   return out.str();
}

std::map<NodeId, Behavior> parse_byzantine(std::string_view spec) {
   std::map<NodeId, Behavior> out;
   while (!spec.empty()) {
      auto comma = spec.find(',');
      auto item  = spec.substr(0, comma);
      auto colon = item.find(':');
      if (colon == std::string_view::npos)
         throw ConfigError("byzantine entry `" + std::string(item) + "` is not <id>:<kind>");
      std::uint32_t id = 0;
      auto          num = item.substr(0, colon);
      auto [p, ec]      = std::from_chars(num.data(), num.data() + num.size(), id);
      if (ec != std::errc{} || p != num.data() + num.size() || num.empty())
         throw ConfigError("bad node id in `" + std::string(item) + "`");
      auto kind = parse_behavior(item.substr(colon + 1));
      if (!kind)
         throw ConfigError("unknown behavior in `" + std::string(item) + "`");
      if (*kind != Behavior::Honest)
         out[NodeId{id}] = *kind;
      if (comma == std::string_view::npos)
         break;
      spec.remove_prefix(comma + 1);
   }
   return out;
}

SimConfig parse_manifest(std::istream& in) {
   SimConfig   c;
   std::string line;
   auto        num = [](const std::string& key, const std::string& v) -> std::uint64_t {
      std::uint64_t out = 0;
      auto [p, ec]      = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
         throw ConfigError("bad value for " + key + ": `" + v + "`");
      return out;
   };
   while (std::getline(in, line)) {
      auto eq = line.find('=');
      if (line.empty() || line[0] == '#' || eq == std::string::npos)
         continue;
      auto key = line.substr(0, eq), v = line.substr(eq + 1);
      if (key == "n")
         c.n = num(key, v);
      else if (key == "k")
         c.k = num(key, v);
      else if (key == "steps")
         c.steps = num(key, v);
      else if (key == "seed")
         c.seed = num(key, v);
      else if (key == "w_c")
         c.w_c = num(key, v);
      else if (key == "width")
         c.cg_width = num(key, v);
      else if (key == "tx_per_step")
         c.tx_per_step = num(key, v);
      else if (key == "clotho_gap")
         c.clotho_gap = static_cast<std::uint32_t>(num(key, v));
      else if (key == "w_p") {
         try {
            c.w_p = std::stod(v);
         } catch (const std::exception&) {
            throw ConfigError("bad value for w_p");
         }
      } else if (key == "delay") {
         auto d = parse_delay(v);
         if (!d)
            throw ConfigError("bad delay model `" + v + "`");
         c.delay = *d;
      } else if (key == "strategy") {
         auto s = parse_strategy(v);
         if (!s)
            throw ConfigError("bad strategy `" + v + "`");
         c.strategy = *s;
      } else if (key == "algo") {
         if (v != "olpl" && v != "ocg")
            throw ConfigError("bad algo `" + v + "`");
         c.algo = v == "olpl" ? LayeringAlgo::OLpl : LayeringAlgo::OCg;
      } else if (key == "byzantine") {
         c.byzantine = v == "-" ? std::map<NodeId, Behavior>{} : parse_byzantine(v);
      }
   }
   return c;
}

void Transport::send(std::vector<Envelope> out, std::uint64_t step, bool reliable) {
   if (out.empty())
      return;
   Rng rng(derive_seed(cfg_.seed, {out.front().src.value, step, kTransportStream, seq_}));
   for (auto& env : out) {
      ++sent_;
      std::uint64_t at = step + 1;
      if (!reliable) {
         switch (cfg_.delay.kind) {
         case DelayKind::Lockstep: break;
         case DelayKind::Random: at += rng.below(cfg_.delay.max_delay + 1); break;
         case DelayKind::Reorder: at += rng.below(2); break;
         case DelayKind::Drop:
            if (rng.chance(cfg_.delay.drop_p)) {
               ++dropped_;
               continue;
            }
            break;
         }
      }
      in_flight_.push_back({at, seq_++, std::move(env)});
   }
}

std::vector<Envelope> Transport::take(NodeId dst, std::uint64_t step) {
   std::vector<Item> due;
   auto              keep = std::stable_partition(in_flight_.begin(), in_flight_.end(), [&](const Item& it) {
      return !(it.env.dst == dst && it.deliver_at <= step);
   });
   std::move(keep, in_flight_.end(), std::back_inserter(due));
   in_flight_.erase(keep, in_flight_.end());
   std::sort(due.begin(), due.end(),
             [](const Item& a, const Item& b) { return std::tie(a.deliver_at, a.seq) < std::tie(b.deliver_at, b.seq); });
   if (cfg_.delay.kind == DelayKind::Reorder && due.size() > 1) {
      Rng rng(derive_seed(cfg_.seed, {dst.value, step, kReorderStream}));
      for (std::size_t i = due.size() - 1; i > 0; --i)
         std::swap(due[i], due[rng.below(i + 1)]);
   }
   std::vector<Envelope> out;
   out.reserve(due.size());
   for (auto& it : due)
      out.push_back(std::move(it.env));
   delivered_ += out.size();
   return out;
}

std::string trace_line(std::uint64_t step, const Envelope& env) {
   std::ostringstream out;
   out << "step=" << step << " " << kind_name(env.body) << " src=" << env.src.value << " dst=" << env.dst.value
       << " payload=" << summary(env.body);
   return out.str();
}

RunResult run(const SimConfig& cfg) {
   cfg.validate();
   RunResult res;
   res.config = cfg;
   for (std::uint32_t i = 0; i < cfg.n; ++i) {
      NodeConfig nc;
      nc.id         = NodeId{i};
      nc.n          = cfg.n;
      nc.k          = cfg.effective_k();
      nc.strategy   = cfg.strategy;
      nc.seed       = cfg.seed;
      nc.behavior   = cfg.behavior(nc.id);
      nc.w_p        = cfg.w_p;
      nc.w_c        = cfg.w_c;
      nc.algo       = cfg.algo;
      nc.cg_width   = cfg.cg_width;
      nc.clotho_gap = cfg.clotho_gap;
      res.nodes.emplace_back(nc);
   }
   Transport net(cfg);

   auto tick = [&](std::uint64_t t, bool create, bool sync_all, bool reliable) {
      for (auto& node : res.nodes) {
         auto inbox = net.take(node.id(), reliable ? UINT64_MAX : t);
         if (cfg.record_trace)
            for (const auto& env : inbox)
               res.trace.push_back(trace_line(t, env));
         if (create && node.config().behavior != Behavior::Silent)
            for (std::size_t j = 0; j < cfg.tx_per_step; ++j)
               node.submit_transaction(t);
         net.send(node.step(t, std::move(inbox), create, sync_all), t, reliable);
      }
   };

   std::uint64_t t = 0;
   for (; t < cfg.steps; ++t)
      tick(t, true, false, false);
   for (const auto& node : res.nodes)
      res.order_before_drain.push_back(node.final_order().ordered.size());

   // Drain: deliver everything, then full syncs until no chain grows.
   auto total = [&] {
      std::size_t s = 0;
      for (const auto& node : res.nodes)
         s += node.chain().size();
      return s;
   };
   auto flush = [&] {
      while (!net.empty())
         tick(t++, false, false, true);
   };
   flush();
   for (;;) {
      std::size_t before = total();
      tick(t++, false, true, true);
      flush();
      ++res.drain_rounds;
      if (total() == before)
         break;
   }
   res.steps_run        = t;
   res.messages_sent    = net.sent();
   res.messages_dropped = net.dropped();
   return res;
}

} // namespace onlay
