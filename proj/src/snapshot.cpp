#include "onlay/snapshot.hpp"

#include "onlay/dag_io.hpp"

#include <charconv>
#include <istream>
#include <sstream>

namespace onlay {

Snapshot take_snapshot(const Node& node) {
   Snapshot    s;
   const auto& chain = node.chain();
   s.node            = node.id();
   s.behavior        = node.config().behavior;
   s.events          = chain.events();
   for (Index i = 0; i < chain.size(); ++i) {
      const auto& id = chain.event(i).id;
      s.vertices[id] = {node.layering().layer_of(i), node.roots().seen_frame(i), node.roots().root_frame(i)};
      if (node.quarantined(i))
         s.quarantine.push_back(id);
   }
   for (const auto& c : node.finality().clothos())
      s.clothos.push_back({chain.event(c.root).id, c.frame, chain.event(c.nominator).id});
   for (const auto& a : node.final_order().atropos)
      s.atropos.emplace_back(chain.event(a.clotho).id, a.consensus_position);
   for (Index i : node.final_order().ordered)
      s.order.push_back(chain.event(i).id);
   return s;
}

std::string format_snapshot(const Snapshot& snap) {
   std::ostringstream out;
   out << "# node=" << snap.node.value << " behavior=" << to_string(snap.behavior) << '\n';
   for (const auto& e : snap.events)
      out << format_event_line(e) << '\n';
   out << "stage\n";
   for (const auto& e : snap.events) {
      auto it = snap.vertices.find(e.id);
      if (it == snap.vertices.end())
         continue;
      out << "vertex " << e.id.hex() << " layer=" << it->second.layer << " frame=" << it->second.frame
          << " root=" << it->second.root << '\n';
   }
   for (const auto& c : snap.clothos)
      out << "clotho " << c.root.hex() << " frame=" << c.frame << " nominator=" << c.nominator.hex() << '\n';
   for (const auto& [id, pos] : snap.atropos)
      out << "atropos " << id.hex() << " position=" << pos << '\n';
   for (std::size_t p = 0; p < snap.order.size(); ++p)
      out << "order " << p << " " << snap.order[p].hex() << '\n';
   for (const auto& id : snap.quarantine)
      out << "quarantine " << id.hex() << '\n';
   return out.str();
}

namespace {

std::uint64_t field(const std::map<std::string, std::string>& kv, const char* key, std::size_t line_no) {
   auto it = kv.find(key);
   if (it == kv.end())
      throw ParseError(line_no, std::string("missing field ") + key);
   std::uint64_t v = 0;
   const auto&   s = it->second;
   auto [p, ec]    = std::from_chars(s.data(), s.data() + s.size(), v);
   if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
      throw ParseError(line_no, std::string("bad integer in ") + key);
   return v;
}

EventId id_at(const std::string& s, std::size_t line_no) {
   try {
      return EventId::from_hex(s);
   } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, std::string("bad event id: ") + e.what());
   }
}

} // namespace

Snapshot parse_snapshot(std::istream& in) {
   Snapshot    s;
   std::string line;
   std::size_t line_no  = 0;
   bool        in_stage = false;
   while (std::getline(in, line)) {
      ++line_no;
      if (line.empty())
         continue;
      if (line[0] == '#') {
         std::istringstream hdr(line.substr(1));
         std::string        tok;
         while (hdr >> tok) {
            if (tok.rfind("node=", 0) == 0)
               s.node = NodeId{static_cast<std::uint32_t>(std::stoul(tok.substr(5)))};
            else if (tok.rfind("behavior=", 0) == 0)
               s.behavior = parse_behavior(tok.substr(9)).value_or(Behavior::Honest);
         }
         continue;
      }
      if (line == "stage") {
         in_stage = true;
         continue;
      }
      if (!in_stage) {
         auto e = parse_event_line(line, line_no, false);
         if (compute_event_id(e) != e.id)
            s.integrity.push_back("line " + std::to_string(line_no) + ": id mismatch for " + e.id.hex());
         s.events.push_back(std::move(e));
         continue;
      }
      std::istringstream                 rec(line);
      std::string                        tag, first, tok;
      std::map<std::string, std::string> kv;
      rec >> tag >> first;
      while (rec >> tok) {
         auto eq = tok.find('=');
         if (eq != std::string::npos)
            kv[tok.substr(0, eq)] = tok.substr(eq + 1);
         else
            kv[""] = tok;
      }
      if (tag == "vertex") {
         s.vertices[id_at(first, line_no)] = {static_cast<std::uint32_t>(field(kv, "layer", line_no)),
                                              static_cast<std::uint32_t>(field(kv, "frame", line_no)),
                                              static_cast<std::uint32_t>(field(kv, "root", line_no))};
      } else if (tag == "clotho") {
         if (!kv.contains("nominator"))
            throw ParseError(line_no, "missing field nominator");
         s.clothos.push_back({id_at(first, line_no), static_cast<std::uint32_t>(field(kv, "frame", line_no)),
                              id_at(kv["nominator"], line_no)});
      } else if (tag == "atropos") {
         s.atropos.emplace_back(id_at(first, line_no), field(kv, "position", line_no));
      } else if (tag == "order") {
         if (!kv.contains(""))
            throw ParseError(line_no, "expected `order <pos> <hex-id>`");
         s.order.push_back(id_at(kv[""], line_no));
      } else if (tag == "quarantine") {
         s.quarantine.push_back(id_at(first, line_no));
      } else {
         throw ParseError(line_no, "unknown stage record `" + tag + "`");
      }
   }
   try {
      chain_of(s);
   } catch (const ChainError& e) {
      s.integrity.push_back(std::string("chain: ") + e.what() + " (" + e.event().hex() + ")");
   }
   return s;
}

OperaChain chain_of(const Snapshot& snap) {
   OperaChain chain;
   for (const auto& e : snap.events)
      chain.insert(e);
   return chain;
}

} // namespace onlay
